use super::{sdr, si_snr};
use crate::error::{Error, Result};
use crate::room::AngleBucket;

/// Largest source count for exhaustive permutation search.
pub const MAX_PERMUTATION_SOURCES: usize = 4;

/// All permutations of `0..n` in lexicographic order (identity first).
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

/// Assignment maximizing the mean of `pair_score[est][ref]`.
///
/// `perm[r]` is the estimate assigned to reference `r`. Ties keep the
/// lexicographically first permutation.
pub fn best_permutation(pair_score: &[Vec<f64>]) -> Result<(Vec<usize>, f64)> {
    let s = pair_score.len();
    if s > MAX_PERMUTATION_SOURCES {
        return Err(Error::TooManySources(s));
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for perm in permutations(s) {
        let mean = perm.iter().enumerate().map(|(r, &e)| pair_score[e][r]).sum::<f64>() / s as f64;
        if best.as_ref().map_or(true, |(_, b)| mean > *b) {
            best = Some((perm, mean));
        }
    }
    best.ok_or(Error::Empty("source list"))
}

/// Scores of one separated utterance under its best assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceScore {
    pub id: String,
    pub bucket: Option<AngleBucket>,
    /// `permutation[r]` = estimate index matched with reference `r`.
    pub permutation: Vec<usize>,
    /// Per reference, in dB.
    pub si_snr: Vec<f64>,
    /// Per reference, in dB; empty when SDR was not computed.
    pub sdr: Vec<f64>,
}

impl UtteranceScore {
    pub fn mean_si_snr(&self) -> f64 {
        self.si_snr.iter().sum::<f64>() / self.si_snr.len() as f64
    }

    pub fn mean_sdr(&self) -> Option<f64> {
        (!self.sdr.is_empty()).then(|| self.sdr.iter().sum::<f64>() / self.sdr.len() as f64)
    }
}

/// Picks the assignment maximizing mean Si-SNR, then reports Si-SNR (and
/// SDR with `sdr_filter_len` taps, if given) under that assignment.
pub fn permute_and_score(
    ests: &[Vec<f64>],
    refs: &[Vec<f64>],
    sdr_filter_len: Option<usize>,
) -> Result<UtteranceScore> {
    if ests.len() != refs.len() {
        return Err(Error::DimensionMismatch(format!("{} estimates for {} references", ests.len(), refs.len())));
    }
    if ests.len() > MAX_PERMUTATION_SOURCES {
        return Err(Error::TooManySources(ests.len()));
    }
    let pair: Vec<Vec<f64>> = ests
        .iter()
        .map(|e| refs.iter().map(|r| si_snr(e, r)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let (permutation, _) = best_permutation(&pair)?;
    let si = permutation.iter().enumerate().map(|(r, &e)| pair[e][r]).collect();
    let sdr_scores = match sdr_filter_len {
        Some(len) => {
            let ref_slices: Vec<&[f64]> = refs.iter().map(Vec::as_slice).collect();
            permutation
                .iter()
                .enumerate()
                .map(|(r, &e)| sdr(&ests[e], &ref_slices, r, len).map(|s| s.db))
                .collect::<Result<Vec<_>>>()?
        }
        None => Vec::new(),
    };
    Ok(UtteranceScore { id: String::new(), bucket: None, permutation, si_snr: si, sdr: sdr_scores })
}
