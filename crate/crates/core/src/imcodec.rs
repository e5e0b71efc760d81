//! Bit-to-block mapping for single-carrier index modulation.
//!
//! A block of `N` slots carries `Q` active symbols. The positions of the
//! active symbols carry index bits and the symbols themselves carry `log2 M`
//! bits each. Two index mappings are supported:
//!
//! * structured: the block is split into `Q` subblocks of `D` slots and each
//!   subblock holds exactly one active symbol (a `D`-ary PPM per subblock);
//! * combinatorial: any `Q`-subset of the `N` slots, addressed by its
//!   lexicographic combinadic rank.
//!
//! Payload layout is always `[index bits][symbol bits of active 0..Q]`, every
//! field read MSB first.

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{invalid, Result, ScimError};
use crate::linalg::C64;

/// Exact binomial coefficient.
pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// `floor(log2 x)` for `x >= 1`.
fn floor_log2(x: &BigUint) -> usize {
    debug_assert!(!x.is_zero());
    (x.bits() - 1) as usize
}

/// Number of index bits of an unconstrained `Q`-of-`N` block: `floor(log2 C(N, Q))`.
pub fn n_bits_im(n: usize, q: usize) -> Result<usize> {
    if q > n {
        return Err(invalid(format!("Q = {q} exceeds N = {n}")));
    }
    Ok(floor_log2(&binomial(n, q)))
}

/// Number of index bits of a structured block: `Q floor(log2 D)`.
pub fn n_bits_structured(q: usize, d: usize) -> Result<usize> {
    if q == 0 || d < 2 {
        return Err(invalid(format!("structured IM needs Q >= 1 and D >= 2, got Q = {q}, D = {d}")));
    }
    Ok(q * d.ilog2() as usize)
}

/// Ratio of structured to unconstrained index bits for `N = Q D`.
pub fn structured_bit_ratio(q: usize, d: usize) -> Result<f64> {
    let structured = n_bits_structured(q, d)?;
    let full = n_bits_im(q * d, q)?;
    Ok(structured as f64 / full as f64)
}

/// Lexicographic rank of a strictly increasing `Q`-subset of `[0, N)`.
pub fn combinadic_rank(support: &[usize], n: usize) -> Result<BigUint> {
    let q = support.len();
    check_increasing(support, n)?;
    let mut rank = BigUint::zero();
    let mut next = 0usize;
    for (i, &c) in support.iter().enumerate() {
        for j in next..c {
            rank += binomial(n - j - 1, q - i - 1);
        }
        next = c + 1;
    }
    Ok(rank)
}

/// The `rank`-th `Q`-subset of `[0, N)` in lexicographic order.
///
/// Accepts every rank below `C(N, Q)`; the encoder itself only produces
/// ranks below `2^{N_im}`.
pub fn combinadic_unrank(rank: &BigUint, n: usize, q: usize) -> Result<Vec<usize>> {
    n_bits_im(n, q)?;
    let limit = binomial(n, q);
    if *rank >= limit {
        return Err(ScimError::RankOutOfRange {
            rank: rank.to_string(),
            limit: limit.to_string(),
        });
    }
    let mut remaining = rank.clone();
    let mut support = Vec::with_capacity(q);
    let mut candidate = 0usize;
    for i in 0..q {
        loop {
            let block = binomial(n - candidate - 1, q - i - 1);
            if remaining < block {
                break;
            }
            remaining -= block;
            candidate += 1;
        }
        support.push(candidate);
        candidate += 1;
    }
    Ok(support)
}

fn check_increasing(support: &[usize], n: usize) -> Result<()> {
    if support.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ScimError::InvalidSupport(format!("{support:?} is not strictly increasing")));
    }
    if support.last().is_some_and(|&last| last >= n) {
        return Err(ScimError::InvalidSupport(format!("{support:?} exceeds block length {n}")));
    }
    Ok(())
}

fn gray_decode(mut g: usize) -> usize {
    let mut b = g;
    while g > 0 {
        g >>= 1;
        b ^= g;
    }
    b
}

/// Gray-mapped BPSK or square M-QAM scaled to a given average energy.
///
/// For 4-QAM the unscaled map is `00 -> +1+j`, `01 -> +1-j`, `10 -> -1+j`,
/// `11 -> -1-j`; larger square constellations use the same rule per axis
/// with a Gray-coded PAM on each half of the label.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    bits: usize,
    energy: f64,
    points: Vec<C64>,
}

impl Constellation {
    pub fn new(m: usize, energy: f64) -> Result<Self> {
        if !(energy > 0.0 && energy.is_finite()) {
            return Err(invalid(format!("symbol energy must be positive, got {energy}")));
        }
        if m < 2 || !m.is_power_of_two() {
            return Err(invalid(format!("M = {m} is not a power of two >= 2")));
        }
        let bits = m.ilog2() as usize;
        let points: Vec<C64> = if m == 2 {
            let a = energy.sqrt();
            vec![C64::new(a, 0.0), C64::new(-a, 0.0)]
        } else {
            if bits % 2 != 0 {
                return Err(invalid(format!("M = {m} is not a square QAM order")));
            }
            let half = bits / 2;
            let side = 1usize << half;
            let pam = |label: usize| ((side - 1) as f64) - 2.0 * gray_decode(label) as f64;
            let raw_energy = 2.0 * (m as f64 - 1.0) / 3.0;
            let scale = (energy / raw_energy).sqrt();
            (0..m)
                .map(|label| {
                    let i_label = label >> half;
                    let q_label = label & (side - 1);
                    C64::new(pam(i_label), pam(q_label)) * scale
                })
                .collect()
        };
        Ok(Self { bits, energy, points })
    }

    pub fn order(&self) -> usize {
        self.points.len()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// Points indexed by their bit label.
    pub fn points(&self) -> &[C64] {
        &self.points
    }

    pub fn point(&self, label: usize) -> C64 {
        self.points[label]
    }

    /// Label of the nearest point (Euclidean); ties go to the lower label.
    pub fn nearest_label(&self, z: C64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (label, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = label;
            }
        }
        best
    }

    pub fn nearest(&self, z: C64) -> C64 {
        self.points[self.nearest_label(z)]
    }

    /// Label of `z` if it is (numerically) a constellation point.
    pub fn label_of(&self, z: C64) -> Option<usize> {
        let label = self.nearest_label(z);
        let tol = 1e-9 * self.energy.sqrt();
        ((z - self.points[label]).norm() <= tol).then_some(label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImMode {
    Structured,
    Combinatorial,
}

/// Index-modulation parameters for one device.
#[derive(Debug, Clone, PartialEq)]
pub struct ImConfig {
    n: usize,
    q: usize,
    d: usize,
    mode: ImMode,
    constellation: Constellation,
}

impl ImConfig {
    /// Structured IM: `N = Q D`, one active slot per subblock.
    pub fn structured(q: usize, d: usize, m: usize, symbol_energy: f64) -> Result<Self> {
        n_bits_structured(q, d)?;
        Ok(Self {
            n: q * d,
            q,
            d,
            mode: ImMode::Structured,
            constellation: Constellation::new(m, symbol_energy)?,
        })
    }

    /// Combinatorial IM over all `Q`-subsets of `N` slots.
    pub fn combinatorial(n: usize, q: usize, m: usize, symbol_energy: f64) -> Result<Self> {
        if q == 0 || q > n {
            return Err(invalid(format!("combinatorial IM needs 1 <= Q <= N, got Q = {q}, N = {n}")));
        }
        Ok(Self {
            n,
            q,
            d: n,
            mode: ImMode::Combinatorial,
            constellation: Constellation::new(m, symbol_energy)?,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Subblock length (structured mode); equals `N` in combinatorial mode.
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.constellation.order()
    }

    pub fn mode(&self) -> ImMode {
        self.mode
    }

    pub fn symbol_energy(&self) -> f64 {
        self.constellation.energy()
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    /// Subblock length when the structured constraint applies.
    pub fn subblock(&self) -> Option<usize> {
        (self.mode == ImMode::Structured).then_some(self.d)
    }

    pub fn n_bits_index(&self) -> usize {
        match self.mode {
            ImMode::Structured => self.q * self.d.ilog2() as usize,
            ImMode::Combinatorial => n_bits_im(self.n, self.q).expect("validated at construction"),
        }
    }

    pub fn n_bits_symbols(&self) -> usize {
        self.q * self.constellation.bits_per_symbol()
    }

    pub fn n_bits_total(&self) -> usize {
        self.n_bits_index() + self.n_bits_symbols()
    }
}

pub fn n_bits_total(cfg: &ImConfig) -> usize {
    cfg.n_bits_total()
}

/// One transmitted SCIM block: `Q` active symbols on a strictly increasing support.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseBlock {
    n: usize,
    support: Vec<usize>,
    symbols: Vec<C64>,
}

impl SparseBlock {
    pub fn new(n: usize, support: Vec<usize>, symbols: Vec<C64>) -> Result<Self> {
        if support.len() != symbols.len() {
            return Err(ScimError::DimensionMismatch(format!(
                "{} support indices but {} symbols",
                support.len(),
                symbols.len()
            )));
        }
        check_increasing(&support, n)?;
        Ok(Self { n, support, symbols })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn symbols(&self) -> &[C64] {
        &self.symbols
    }

    pub fn to_dense(&self) -> Vec<C64> {
        let mut s = vec![C64::new(0.0, 0.0); self.n];
        for (&i, &v) in self.support.iter().zip(&self.symbols) {
            s[i] = v;
        }
        s
    }
}

/// Information bits of one block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitPayload(pub Vec<bool>);

impl BitPayload {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }
}

fn read_uint(bits: &[bool]) -> usize {
    bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize)
}

fn push_uint(out: &mut Vec<bool>, value: usize, width: usize) {
    for i in (0..width).rev() {
        out.push((value >> i) & 1 == 1);
    }
}

fn read_big(bits: &[bool]) -> BigUint {
    let mut acc = BigUint::zero();
    for &b in bits {
        acc <<= 1u32;
        if b {
            acc += 1u32;
        }
    }
    acc
}

fn push_big(out: &mut Vec<bool>, value: &BigUint, width: usize) {
    for i in (0..width).rev() {
        out.push(value.bit(i as u64));
    }
}

pub fn encode(bits: &BitPayload, cfg: &ImConfig) -> Result<SparseBlock> {
    let expected = cfg.n_bits_total();
    if bits.len() != expected {
        return Err(ScimError::PayloadLength {
            expected,
            actual: bits.len(),
        });
    }
    let index_bits = cfg.n_bits_index();
    let (index_part, symbol_part) = bits.bits().split_at(index_bits);
    let support = match cfg.mode {
        ImMode::Structured => {
            let width = cfg.d.ilog2() as usize;
            index_part
                .chunks(width)
                .enumerate()
                .map(|(sub, chunk)| sub * cfg.d + read_uint(chunk))
                .collect()
        }
        ImMode::Combinatorial => combinadic_unrank(&read_big(index_part), cfg.n, cfg.q)?,
    };
    let width = cfg.constellation.bits_per_symbol();
    let symbols = symbol_part
        .chunks(width)
        .map(|chunk| cfg.constellation.point(read_uint(chunk)))
        .collect();
    SparseBlock::new(cfg.n, support, symbols)
}

/// Checks that `support` is a valid support for `cfg`.
pub fn validate_support(support: &[usize], cfg: &ImConfig) -> Result<()> {
    if support.len() != cfg.q {
        return Err(ScimError::InvalidSupport(format!(
            "{} active indices, expected {}",
            support.len(),
            cfg.q
        )));
    }
    check_increasing(support, cfg.n)?;
    match cfg.mode {
        ImMode::Structured => {
            let reachable = 1usize << cfg.d.ilog2();
            for (sub, &idx) in support.iter().enumerate() {
                if idx / cfg.d != sub {
                    return Err(ScimError::InvalidSupport(format!(
                        "index {idx} is not in subblock {sub} of length {}",
                        cfg.d
                    )));
                }
                if idx % cfg.d >= reachable {
                    return Err(ScimError::InvalidSupport(format!(
                        "offset {} in subblock {sub} is not addressable by {} bits",
                        idx % cfg.d,
                        cfg.d.ilog2()
                    )));
                }
            }
        }
        ImMode::Combinatorial => {
            let rank = combinadic_rank(support, cfg.n)?;
            if rank.bits() as usize > cfg.n_bits_index() {
                return Err(ScimError::InvalidSupport(format!(
                    "support rank {rank} is outside the addressable range"
                )));
            }
        }
    }
    Ok(())
}

pub fn decode(block: &SparseBlock, cfg: &ImConfig) -> Result<BitPayload> {
    if block.n != cfg.n {
        return Err(ScimError::DimensionMismatch(format!(
            "block length {} vs configured N = {}",
            block.n, cfg.n
        )));
    }
    validate_support(&block.support, cfg)?;
    let mut out = Vec::with_capacity(cfg.n_bits_total());
    match cfg.mode {
        ImMode::Structured => {
            let width = cfg.d.ilog2() as usize;
            for &idx in &block.support {
                push_uint(&mut out, idx % cfg.d, width);
            }
        }
        ImMode::Combinatorial => {
            let rank = combinadic_rank(&block.support, cfg.n)?;
            push_big(&mut out, &rank, cfg.n_bits_index());
        }
    }
    let width = cfg.constellation.bits_per_symbol();
    for &z in &block.symbols {
        let label = cfg
            .constellation
            .label_of(z)
            .ok_or_else(|| ScimError::NotInConstellation(format!("{z}")))?;
        push_uint(&mut out, label, width);
    }
    Ok(BitPayload(out))
}
