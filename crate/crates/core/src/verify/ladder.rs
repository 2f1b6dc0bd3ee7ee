use crate::error::Result;
use crate::flow::{init_state, run_flow_from, FlowOptions, FlowState};
use crate::potentials::{truncate, SingularPotential};

/// Truncation level paired with `t = 2^{−k}`: `4 + 2⌊k/2⌋`.
pub fn matched_level(k: u32) -> u32 {
    4 + 2 * (k / 2)
}

/// Flow state at `t = 2^{−k}` from the flow truncated at `matched_level(k)`.
#[derive(Debug, Clone)]
pub struct LadderEntry {
    pub k: u32,
    pub t: f64,
    pub level: u32,
    pub state: FlowState,
}

/// States along `t = 2^{−k}`, `k = 0..=depth`, in order of increasing `k`.
#[derive(Debug, Clone)]
pub struct MatchedLadder {
    pub entries: Vec<LadderEntry>,
}

/// Runs one flow per truncation level, each sampled at the ladder times
/// assigned to that level.
pub fn run_matched_ladder(
    plus: &SingularPotential,
    minus: &SingularPotential,
    depth: u32,
    opts: FlowOptions,
) -> Result<MatchedLadder> {
    let mut entries = Vec::new();
    let mut k = 0;
    while k <= depth {
        let level = matched_level(k);
        let ks: Vec<u32> = (k..=depth)
            .take_while(|&q| matched_level(q) == level)
            .collect();
        let mut times: Vec<f64> = ks.iter().map(|&q| 0.5f64.powi(q as i32)).collect();
        times.reverse();
        let j = level as f64;
        let (s0, c) = init_state(plus, minus, j)?;
        let traj = run_flow_from(s0, truncate(plus, j), truncate(minus, j), c, &times, opts)?;
        for &q in &ks {
            let t = 0.5f64.powi(q as i32);
            let state = traj.state_at(t).expect("ladder time present").clone();
            entries.push(LadderEntry {
                k: q,
                t,
                level,
                state,
            });
        }
        k += ks.len() as u32;
    }
    Ok(MatchedLadder { entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levels_pair_up() {
        let levels: Vec<u32> = (0..=10).map(matched_level).collect();
        assert_eq!(levels, vec![4, 4, 6, 6, 8, 8, 10, 10, 12, 12, 14]);
    }
}
