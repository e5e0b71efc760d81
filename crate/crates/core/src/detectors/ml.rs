//! Exhaustive maximum-likelihood search over supports and symbol tuples.

use std::ops::Range;

use crate::error::{invalid, Result, ScimError};
use crate::imcodec::{binomial, Constellation};
use crate::linalg::{dotc, CMatrix, C64};
use num_traits::ToPrimitive;

/// Largest number of candidate blocks the search will visit.
pub const ML_SEARCH_LIMIT: u128 = 1 << 24;

#[derive(Debug, Clone, PartialEq)]
pub struct MlOutput {
    pub support: Vec<usize>,
    pub symbols: Vec<C64>,
    /// `||r - A s||^2` at the minimizer.
    pub residual: f64,
}

/// A column range from which exactly `picks` columns must be active.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportGroup {
    pub columns: Range<usize>,
    pub picks: usize,
}

/// Minimizes `||r - A s||^2` over `Q`-sparse blocks with symbols from
/// `constellation`; with `subblock = Some(D)` exactly one index per
/// length-`D` subblock is active. Ties keep the first candidate in
/// lexicographic (support, label) order.
pub fn ml_exhaustive(
    r: &[C64],
    a: &CMatrix,
    q: usize,
    constellation: &Constellation,
    subblock: Option<usize>,
) -> Result<MlOutput> {
    let cols = a.ncols();
    let groups = match subblock {
        Some(d) => {
            if d == 0 || cols % d != 0 || cols / d != q {
                return Err(invalid(format!("{cols} columns do not form {q} subblocks of length {d}")));
            }
            (0..q).map(|b| SupportGroup { columns: b * d..(b + 1) * d, picks: 1 }).collect()
        }
        None => vec![SupportGroup { columns: 0..cols, picks: q }],
    };
    ml_exhaustive_grouped(r, a, &groups, constellation)
}

/// [`ml_exhaustive`] with an explicit list of column groups.
pub fn ml_exhaustive_grouped(
    r: &[C64],
    a: &CMatrix,
    groups: &[SupportGroup],
    constellation: &Constellation,
) -> Result<MlOutput> {
    let (rows, cols) = a.shape();
    if r.len() != rows {
        return Err(ScimError::DimensionMismatch(format!(
            "observation length {} vs {rows} rows",
            r.len()
        )));
    }
    let q: usize = groups.iter().map(|g| g.picks).sum();
    if q == 0 {
        return Err(invalid("ML search needs at least one active index"));
    }
    for g in groups {
        if g.columns.end > cols || g.picks > g.columns.len() {
            return Err(invalid(format!("group {:?} cannot hold {} picks", g.columns, g.picks)));
        }
    }

    let mut size: u128 = 1;
    for g in groups {
        let count = binomial(g.columns.len(), g.picks).to_u128().unwrap_or(u128::MAX);
        size = size.saturating_mul(count);
    }
    size = size.saturating_mul((constellation.order() as u128).saturating_pow(q as u32));
    if size > ML_SEARCH_LIMIT {
        return Err(ScimError::SearchTooLarge(size));
    }

    let data = a.as_slice();
    let column = |j: usize| &data[j * rows..(j + 1) * rows];
    let corr: Vec<C64> = (0..cols).map(|j| dotc(column(j), r)).collect();
    let energy: f64 = r.iter().map(|z| z.norm_sqr()).sum();
    let points = constellation.points();
    let m = points.len();

    let mut best: Option<MlOutput> = None;
    let mut gram = vec![C64::new(0.0, 0.0); q * q];
    let mut labels = vec![0usize; q];
    let mut syms = vec![C64::new(0.0, 0.0); q];

    for_each_support(groups, &mut |support: &[usize]| {
        for i in 0..q {
            for k in 0..q {
                gram[i * q + k] = dotc(column(support[i]), column(support[k]));
            }
        }
        labels.fill(0);
        loop {
            for (s, &lab) in syms.iter_mut().zip(&labels) {
                *s = points[lab];
            }
            let mut value = energy;
            for i in 0..q {
                value -= 2.0 * (syms[i].conj() * corr[support[i]]).re;
                for k in 0..q {
                    value += (syms[i].conj() * gram[i * q + k] * syms[k]).re;
                }
            }
            if best.as_ref().is_none_or(|b| value < b.residual) {
                best = Some(MlOutput {
                    support: support.to_vec(),
                    symbols: syms.clone(),
                    residual: value,
                });
            }
            // odometer over labels, last position fastest
            let mut pos = q;
            loop {
                if pos == 0 {
                    return;
                }
                pos -= 1;
                labels[pos] += 1;
                if labels[pos] < m {
                    break;
                }
                labels[pos] = 0;
            }
        }
    });

    let mut out = best.ok_or_else(|| invalid("empty ML search space"))?;
    let mut pairs: Vec<(usize, C64)> = out.support.iter().copied().zip(out.symbols.iter().copied()).collect();
    pairs.sort_by_key(|p| p.0);
    out.support = pairs.iter().map(|p| p.0).collect();
    out.symbols = pairs.iter().map(|p| p.1).collect();
    out.residual = out.residual.max(0.0);
    Ok(out)
}

/// Visits every support formed by choosing `picks` columns in each group,
/// in lexicographic order.
fn for_each_support(groups: &[SupportGroup], visit: &mut dyn FnMut(&[usize])) {
    fn recurse(groups: &[SupportGroup], prefix: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
        match groups.split_first() {
            None => visit(prefix),
            Some((g, rest)) => {
                choose(g.columns.start, g.columns.end, g.picks, prefix, &mut |p| recurse(rest, p, visit));
            }
        }
    }
    fn choose(from: usize, to: usize, k: usize, prefix: &mut Vec<usize>, next: &mut dyn FnMut(&mut Vec<usize>)) {
        if k == 0 {
            next(prefix);
            return;
        }
        for j in from..=(to - k) {
            prefix.push(j);
            choose(j + 1, to, k - 1, prefix, next);
            prefix.pop();
        }
    }
    recurse(groups, &mut Vec::new(), visit);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::cscg;
    use crate::linalg::CVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_instance(rng: &mut ChaCha8Rng, l: usize, n: usize) -> CMatrix {
        CMatrix::from_fn(l, n, |_, _| cscg(rng, 1.0 / l as f64))
    }

    /// Plain double loop over index pairs and label pairs with a direct residual.
    fn naive_q2(r: &[C64], a: &CMatrix, c: &Constellation) -> (Vec<usize>, Vec<C64>) {
        let mut best = (f64::INFINITY, vec![], vec![]);
        for i in 0..a.ncols() {
            for j in (i + 1)..a.ncols() {
                for &si in c.points() {
                    for &sj in c.points() {
                        let res: f64 = (0..a.nrows())
                            .map(|row| (r[row] - a[(row, i)] * si - a[(row, j)] * sj).norm_sqr())
                            .sum();
                        if res < best.0 {
                            best = (res, vec![i, j], vec![si, sj]);
                        }
                    }
                }
            }
        }
        (best.1, best.2)
    }

    #[test]
    fn noiseless_block_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = Constellation::new(4, 2.0).unwrap();
        let a = random_instance(&mut rng, 8, 8);
        let mut s = vec![C64::new(0.0, 0.0); 8];
        s[1] = c.point(2);
        s[6] = c.point(1);
        let r = &a * CVector::from_vec(s);
        let out = ml_exhaustive(r.as_slice(), &a, 2, &c, Some(4)).unwrap();
        assert_eq!(out.support, vec![1, 6]);
        assert_eq!(out.symbols, vec![c.point(2), c.point(1)]);
        assert!(out.residual < 1e-12);
        let free = ml_exhaustive(r.as_slice(), &a, 2, &c, None).unwrap();
        assert_eq!(free.support, vec![1, 6]);
    }

    #[test]
    fn matches_naive_enumerator() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = Constellation::new(4, 2.0).unwrap();
        for _ in 0..200 {
            let a = random_instance(&mut rng, 5, 6);
            let r: Vec<C64> = (0..5).map(|_| cscg(&mut rng, 2.0)).collect();
            let out = ml_exhaustive(&r, &a, 2, &c, None).unwrap();
            let (sup, sym) = naive_q2(&r, &a, &c);
            assert_eq!(out.support, sup);
            assert_eq!(out.symbols, sym);
        }
    }

    #[test]
    fn grouped_supports_respect_groups() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = Constellation::new(2, 1.0).unwrap();
        let a = random_instance(&mut rng, 6, 6);
        let r: Vec<C64> = (0..6).map(|_| cscg(&mut rng, 1.0)).collect();
        let groups = [
            SupportGroup { columns: 0..3, picks: 1 },
            SupportGroup { columns: 3..6, picks: 2 },
        ];
        let out = ml_exhaustive_grouped(&r, &a, &groups, &c).unwrap();
        assert_eq!(out.support.iter().filter(|&&j| j < 3).count(), 1);
        assert_eq!(out.support.iter().filter(|&&j| j >= 3).count(), 2);
    }

    #[test]
    fn support_enumeration_order_and_count() {
        let mut seen = Vec::new();
        for_each_support(&[SupportGroup { columns: 0..4, picks: 2 }], &mut |s| seen.push(s.to_vec()));
        assert_eq!(seen, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
    }

    #[test]
    fn guard_rejects_huge_searches() {
        let a = CMatrix::identity(64, 80);
        let c = Constellation::new(4, 2.0).unwrap();
        let r = vec![C64::new(0.0, 0.0); 64];
        assert!(matches!(ml_exhaustive(&r, &a, 10, &c, Some(8)), Err(ScimError::SearchTooLarge(_))));
    }

    #[test]
    fn rejects_inconsistent_structure() {
        let a = CMatrix::identity(4, 6);
        let c = Constellation::new(4, 2.0).unwrap();
        assert!(ml_exhaustive(&[C64::new(0.0, 0.0); 4], &a, 2, &c, Some(4)).is_err());
        assert!(ml_exhaustive(&[C64::new(0.0, 0.0); 3], &a, 2, &c, None).is_err());
    }
}
