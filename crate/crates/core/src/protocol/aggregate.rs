use serde::{Deserialize, Serialize};

use super::ParsedOutput;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregateFlag {
    /// No replicate parsed cleanly.
    Unparseable,
    /// The vote tied and the mean proxy was exactly zero.
    ResidualTie,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub final_label: u8,
    /// Mean proxy over valid replicates (0 when there are none).
    pub mean_proxy: f64,
    /// Votes for label 0 and label 1 among valid replicates.
    pub vote_counts: [usize; 2],
    pub n_valid: usize,
    pub flag: Option<AggregateFlag>,
    /// Tie broken by the sign of the mean proxy.
    pub tie_broken: bool,
}

/// Majority vote over the cleanly parsed replicates. A tied vote goes to the
/// sign of the mean proxy; a residual tie or an empty vote gives 0.
pub fn aggregate_replicates(outputs: &[ParsedOutput]) -> Aggregate {
    let valid: Vec<(u8, f64)> = outputs
        .iter()
        .filter(|o| o.is_ok())
        .filter_map(|o| Some((o.prediction?, o.proxy()?)))
        .collect();
    let mut votes = [0usize; 2];
    for &(label, _) in &valid {
        votes[usize::from(label)] += 1;
    }
    if valid.is_empty() {
        return Aggregate {
            final_label: 0,
            mean_proxy: 0.0,
            vote_counts: votes,
            n_valid: 0,
            flag: Some(AggregateFlag::Unparseable),
            tie_broken: false,
        };
    }
    let mean_proxy = valid.iter().map(|&(_, p)| p).sum::<f64>() / valid.len() as f64;
    let (final_label, flag, tie_broken) = match votes[1].cmp(&votes[0]) {
        std::cmp::Ordering::Greater => (1, None, false),
        std::cmp::Ordering::Less => (0, None, false),
        std::cmp::Ordering::Equal if mean_proxy > 0.0 => (1, None, true),
        std::cmp::Ordering::Equal if mean_proxy < 0.0 => (0, None, true),
        std::cmp::Ordering::Equal => (0, Some(AggregateFlag::ResidualTie), true),
    };
    Aggregate {
        final_label,
        mean_proxy,
        vote_counts: votes,
        n_valid: valid.len(),
        flag,
        tie_broken,
    }
}
