use thiserror::Error;

/// Feature names that matched a post-operative blocklist pattern.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("post-operative features present: {}", .violations.join(", "))]
pub struct LeakageViolation {
    pub violations: Vec<String>,
}

/// Rejects any feature name containing a blocklist pattern
/// (case-insensitive substring match). Every offending name is reported.
pub fn leakage_guard<S: AsRef<str>, P: AsRef<str>>(
    feature_names: &[S],
    blocklist: &[P],
) -> Result<(), LeakageViolation> {
    let patterns: Vec<String> = blocklist
        .iter()
        .map(|p| p.as_ref().to_uppercase())
        .filter(|p| !p.is_empty())
        .collect();
    let violations: Vec<String> = feature_names
        .iter()
        .map(AsRef::as_ref)
        .filter(|name| {
            let upper = name.to_uppercase();
            patterns.iter().any(|p| upper.contains(p.as_str()))
        })
        .map(str::to_string)
        .collect();
    if violations.is_empty() {
        Ok(())
    } else {
        Err(LeakageViolation { violations })
    }
}
