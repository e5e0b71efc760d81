//! Sparsity-terminated orthogonal matching pursuit.

use std::ops::Range;

use crate::channel::ChannelRealization;
use crate::error::{invalid, Result, ScimError};
use crate::linalg::{dotc, norm_sqr, CMatrix, IncrementalQr, C64};
use crate::precoding::Precoder;

use super::mmse::mmse_front_end;

/// Restriction on which columns may still be picked.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PickLimit {
    None,
    /// Consecutive groups of `group_len` columns, each picked at most `capacity` times.
    PerGroup { group_len: usize, capacity: usize },
    /// One group per device column range.
    PerDevice { layout: Vec<Range<usize>>, capacity: usize },
}

impl PickLimit {
    fn groups(&self, cols: usize) -> Result<(Vec<usize>, usize)> {
        match self {
            PickLimit::None => Ok((vec![0; cols], usize::MAX)),
            PickLimit::PerGroup { group_len, capacity } => {
                if *group_len == 0 || cols % group_len != 0 {
                    return Err(invalid(format!("{cols} columns do not split into groups of {group_len}")));
                }
                Ok(((0..cols).map(|j| j / group_len).collect(), *capacity))
            }
            PickLimit::PerDevice { layout, capacity } => {
                let mut group = vec![usize::MAX; cols];
                for (dev, range) in layout.iter().enumerate() {
                    for j in range.clone() {
                        if j < cols {
                            group[j] = dev;
                        }
                    }
                }
                if group.contains(&usize::MAX) {
                    return Err(invalid("device layout does not cover every column"));
                }
                Ok((group, *capacity))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmpOutput {
    /// Selected columns, ascending.
    pub support: Vec<usize>,
    /// Least-squares amplitudes aligned with `support`.
    pub amplitudes: Vec<C64>,
    /// Columns in the order they were picked.
    pub picks: Vec<usize>,
    /// Residual norm before the first pick and after each pick.
    pub residual_norms: Vec<f64>,
}

/// Runs `sparsity` OMP iterations of `r` against the columns of `a`.
///
/// Each step picks the feasible column maximizing `|a_n^H res| / ||a_n||`
/// (lowest index on ties) and projects the residual off the span of the
/// accumulated support.
pub fn omp(r: &[C64], a: &CMatrix, sparsity: usize, limit: &PickLimit) -> Result<OmpOutput> {
    let (rows, cols) = a.shape();
    if r.len() != rows {
        return Err(ScimError::DimensionMismatch(format!(
            "observation length {} vs {rows} rows",
            r.len()
        )));
    }
    if sparsity == 0 || sparsity > cols {
        return Err(invalid(format!("sparsity {sparsity} outside 1..={cols}")));
    }
    let (group, capacity) = limit.groups(cols)?;
    let mut group_count = vec![0usize; group.iter().max().map_or(0, |g| g + 1)];

    let data = a.as_slice();
    let column = |j: usize| &data[j * rows..(j + 1) * rows];
    let mut inv_norms = Vec::with_capacity(cols);
    for j in 0..cols {
        let n2 = norm_sqr(column(j));
        if n2 == 0.0 {
            return Err(ScimError::ZeroColumn(j));
        }
        inv_norms.push(1.0 / n2);
    }

    let mut residual = r.to_vec();
    let mut chosen = vec![false; cols];
    let mut qr = IncrementalQr::new(rows);
    let mut picks = Vec::with_capacity(sparsity);
    let mut residual_norms = Vec::with_capacity(sparsity + 1);
    residual_norms.push(norm_sqr(&residual).sqrt());

    for _ in 0..sparsity {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..cols {
            if chosen[j] || group_count[group[j]] >= capacity {
                continue;
            }
            let score = dotc(column(j), &residual).norm_sqr() * inv_norms[j];
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        let (j, _) = best.ok_or_else(|| invalid("no feasible column left to pick"))?;
        qr.push(column(j), j)?;
        let qj = qr.basis().last().expect("column just pushed");
        let c = dotc(qj, &residual);
        for (x, qi) in residual.iter_mut().zip(qj) {
            *x -= c * qi;
        }
        chosen[j] = true;
        group_count[group[j]] += 1;
        picks.push(j);
        residual_norms.push(norm_sqr(&residual).sqrt());
    }

    let coeffs = qr.solve(r);
    let mut pairs: Vec<(usize, C64)> = picks.iter().copied().zip(coeffs).collect();
    pairs.sort_by_key(|p| p.0);
    Ok(OmpOutput {
        support: pairs.iter().map(|p| p.0).collect(),
        amplitudes: pairs.iter().map(|p| p.1).collect(),
        picks,
        residual_norms,
    })
}

/// MMSE equalization of the channel, then OMP on the precoder alone.
pub fn omp_mmse(
    r: &[C64],
    channel: &ChannelRealization,
    precoder: &Precoder,
    gamma: f64,
    q: usize,
    limit: &PickLimit,
) -> Result<OmpOutput> {
    let v = mmse_front_end(r, channel.freq_response(), gamma, q)?;
    omp(&v, precoder.matrix(), q, limit)
}
