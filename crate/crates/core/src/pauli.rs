//! Complex-weighted Pauli-string algebra.
//!
//! A [`PauliString`] stores its letters as two bitmasks (X-part and Z-part).
//! Qubit `q` of a width-`n` string lives at bit `n - 1 - q`, so the masks line
//! up with computational basis indices where qubit 0 is the most significant
//! bit. Letter `Y` is the Hermitian Pauli-Y, not `XZ`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::{CMatrix, C64};

/// Coefficients below this magnitude are removed when a sum is normalized.
pub const DEFAULT_PRUNE_TOL: f64 = 1e-12;

/// Largest width [`PauliSum::to_matrix`] will densify by default.
pub const DEFAULT_DENSE_CAP: usize = 14;

const MAX_WIDTH: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn to_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    x: u64,
    z: u64,
    width: u8,
}

/// `i^k` for `k` taken mod 4.
pub(crate) fn i_pow(k: u32) -> C64 {
    match k % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

impl PauliString {
    pub fn identity(width: usize) -> Self {
        assert!(width <= MAX_WIDTH, "Pauli strings support at most 64 qubits");
        Self { x: 0, z: 0, width: width as u8 }
    }

    pub fn from_masks(width: usize, x: u64, z: u64) -> Self {
        assert!(width <= MAX_WIDTH, "Pauli strings support at most 64 qubits");
        let keep = width_mask(width);
        Self { x: x & keep, z: z & keep, width: width as u8 }
    }

    pub fn from_letters(letters: &[Pauli]) -> Self {
        let width = letters.len();
        let mut s = Self::identity(width);
        for (q, &p) in letters.iter().enumerate() {
            s.set(q, p);
        }
        s
    }

    /// A single non-identity letter on `qubit`.
    pub fn single(width: usize, qubit: usize, p: Pauli) -> Self {
        let mut s = Self::identity(width);
        s.set(qubit, p);
        s
    }

    pub fn width(&self) -> usize {
        self.width as usize
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    fn bit(&self, qubit: usize) -> u64 {
        1u64 << (self.width as usize - 1 - qubit)
    }

    pub fn get(&self, qubit: usize) -> Pauli {
        let b = self.bit(qubit);
        Pauli::from_bits(self.x & b != 0, self.z & b != 0)
    }

    pub fn set(&mut self, qubit: usize, p: Pauli) {
        assert!(qubit < self.width as usize, "qubit {qubit} out of range");
        let b = self.bit(qubit);
        let (x, z) = p.bits();
        self.x = if x { self.x | b } else { self.x & !b };
        self.z = if z { self.z | b } else { self.z & !b };
    }

    pub fn letters(&self) -> Vec<Pauli> {
        (0..self.width()).map(|q| self.get(q)).collect()
    }

    /// Number of non-identity letters.
    pub fn weight(&self) -> usize {
        (self.x | self.z).count_ones() as usize
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    fn num_y(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    /// Product `self · other = i^k · result`, returning `(k mod 4, result)`.
    pub fn mul(&self, other: &PauliString) -> (u32, PauliString) {
        debug_assert_eq!(self.width, other.width);
        let (x1, z1, x2, z2) = (self.x, self.z, other.x, other.z);
        let (xa, ya, za) = (x1 & !z1, x1 & z1, !x1 & z1);
        let (xb, yb, zb) = (x2 & !z2, x2 & z2, !x2 & z2);
        let plus = (xa & yb).count_ones() + (ya & zb).count_ones() + (za & xb).count_ones();
        let minus = (ya & xb).count_ones() + (za & yb).count_ones() + (xa & zb).count_ones();
        let k = (4 + plus % 4 - minus % 4) % 4;
        (k, PauliString { x: x1 ^ x2, z: z1 ^ z2, width: self.width })
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        let sym = (self.x & other.z).count_ones() + (self.z & other.x).count_ones();
        sym % 2 == 0
    }

    /// Action on a computational basis state: `P|b⟩ = phase · |b'⟩`.
    #[inline]
    pub fn apply_to_basis(&self, b: usize) -> (usize, C64) {
        let sign = ((b as u64) & self.z).count_ones();
        (b ^ self.x as usize, i_pow(self.num_y() + 2 * sign))
    }

    /// Places this string at qubit `offset` inside a wider register.
    pub fn embed(&self, offset: usize, total_width: usize) -> PauliString {
        assert!(offset + self.width() <= total_width);
        let shift = total_width - offset - self.width();
        PauliString::from_masks(total_width, self.x << shift, self.z << shift)
    }
}

fn width_mask(width: usize) -> u64 {
    if width == 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in self.letters() {
            write!(f, "{}", p.to_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let letters = s
            .chars()
            .map(|c| Pauli::from_char(c).ok_or_else(|| Error::Parse(format!("bad Pauli letter {c:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if letters.len() > MAX_WIDTH {
            return Err(Error::Parse(format!("string of width {} exceeds 64", letters.len())));
        }
        Ok(PauliString::from_letters(&letters))
    }
}

/// A complex linear combination of same-width Pauli strings.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliSum {
    width: usize,
    terms: BTreeMap<PauliString, C64>,
}

impl PauliSum {
    pub fn zero(width: usize) -> Self {
        assert!(width <= MAX_WIDTH);
        Self { width, terms: BTreeMap::new() }
    }

    pub fn identity(width: usize, coeff: C64) -> Self {
        let mut s = Self::zero(width);
        s.add_term(PauliString::identity(width), coeff);
        s.prune(DEFAULT_PRUNE_TOL);
        s
    }

    pub fn from_string(p: PauliString, coeff: C64) -> Self {
        let mut s = Self::zero(p.width());
        s.add_term(p, coeff);
        s.prune(DEFAULT_PRUNE_TOL);
        s
    }

    /// Builds a sum from `(coefficient, letters)` pairs, e.g. `(0.25, "XIXI")`.
    pub fn from_labels<S: AsRef<str>>(width: usize, terms: &[(C64, S)]) -> Result<Self> {
        let mut s = Self::zero(width);
        for (c, label) in terms {
            let p: PauliString = label.as_ref().parse()?;
            if p.width() != width {
                return Err(Error::WidthMismatch { left: width, right: p.width() });
            }
            s.add_term(p, *c);
        }
        s.prune(DEFAULT_PRUNE_TOL);
        Ok(s)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PauliString, &C64)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, p: &PauliString) -> C64 {
        self.terms.get(p).copied().unwrap_or_default()
    }

    pub fn coefficient_of(&self, label: &str) -> Result<C64> {
        let p: PauliString = label.parse()?;
        Ok(self.coefficient(&p))
    }

    /// Accumulates `coeff · p` without pruning.
    pub fn add_term(&mut self, p: PauliString, coeff: C64) {
        assert_eq!(p.width(), self.width, "term width differs from sum width");
        *self.terms.entry(p).or_default() += coeff;
    }

    pub fn prune(&mut self, tol: f64) {
        self.terms.retain(|_, c| c.norm() >= tol);
    }

    pub fn max_weight(&self) -> usize {
        self.terms.keys().map(|p| p.weight()).max().unwrap_or(0)
    }

    fn check_width(&self, other: &PauliSum) -> Result<()> {
        if self.width != other.width {
            return Err(Error::WidthMismatch { left: self.width, right: other.width });
        }
        Ok(())
    }

    pub fn add(&self, other: &PauliSum) -> Result<PauliSum> {
        self.check_width(other)?;
        let mut out = self.clone();
        for (p, c) in &other.terms {
            out.add_term(*p, *c);
        }
        out.prune(DEFAULT_PRUNE_TOL);
        Ok(out)
    }

    pub fn sub(&self, other: &PauliSum) -> Result<PauliSum> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, factor: C64) -> PauliSum {
        let mut out = PauliSum::zero(self.width);
        for (p, c) in &self.terms {
            out.add_term(*p, c * factor);
        }
        out.prune(DEFAULT_PRUNE_TOL);
        out
    }

    /// Hermitian adjoint. Every Pauli string is Hermitian, so only the
    /// coefficients are conjugated.
    pub fn adjoint(&self) -> PauliSum {
        PauliSum {
            width: self.width,
            terms: self.terms.iter().map(|(p, c)| (*p, c.conj())).collect(),
        }
    }

    pub fn multiply(&self, other: &PauliSum) -> Result<PauliSum> {
        self.check_width(other)?;
        let mut out = PauliSum::zero(self.width);
        for (pa, ca) in &self.terms {
            for (pb, cb) in &other.terms {
                let (k, p) = pa.mul(pb);
                out.add_term(p, ca * cb * i_pow(k));
            }
        }
        out.prune(DEFAULT_PRUNE_TOL);
        Ok(out)
    }

    /// `[a, b] = a·b − b·a`, computed stringwise: commuting pairs cancel and
    /// anticommuting pairs contribute twice their product.
    pub fn commutator(&self, other: &PauliSum) -> Result<PauliSum> {
        self.check_width(other)?;
        let mut out = PauliSum::zero(self.width);
        for (pa, ca) in &self.terms {
            for (pb, cb) in &other.terms {
                if pa.commutes_with(pb) {
                    continue;
                }
                let (k, p) = pa.mul(pb);
                out.add_term(p, 2.0 * ca * cb * i_pow(k));
            }
        }
        out.prune(DEFAULT_PRUNE_TOL);
        Ok(out)
    }

    /// Largest coefficient magnitude (0 for the empty sum).
    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.terms.values().all(|c| c.im.abs() <= tol)
    }

    /// Moves the sum to qubits `offset..offset + width` of a wider register.
    pub fn embed(&self, offset: usize, total_width: usize) -> Result<PauliSum> {
        if offset + self.width > total_width {
            return Err(Error::Shape(format!(
                "cannot embed width {} at offset {offset} into width {total_width}",
                self.width
            )));
        }
        let mut out = PauliSum::zero(total_width);
        for (p, c) in &self.terms {
            out.add_term(p.embed(offset, total_width), *c);
        }
        Ok(out)
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        self.to_matrix_capped(DEFAULT_DENSE_CAP)
    }

    pub fn to_matrix_capped(&self, cap: usize) -> Result<CMatrix> {
        if self.width > cap {
            return Err(Error::Capacity { width: self.width, cap });
        }
        let dim = 1usize << self.width;
        let mut m = DMatrix::<C64>::zeros(dim, dim);
        for (p, c) in &self.terms {
            for b in 0..dim {
                let (row, phase) = p.apply_to_basis(b);
                m[(row, b)] += c * phase;
            }
        }
        Ok(m)
    }

    /// Pauli decomposition `c_s = Tr(P_s m) / 2^width`, dropping `|c_s| < tol`.
    ///
    /// For a fixed X-mask the coefficients over all Z-masks are a
    /// Walsh-Hadamard transform of the matching matrix diagonal, so the whole
    /// decomposition costs `O(width · 4^width)`.
    pub fn from_matrix(m: &CMatrix, width: usize, tol: f64) -> Result<PauliSum> {
        if m.nrows() != m.ncols() {
            return Err(Error::Shape(format!("matrix is {}x{}, not square", m.nrows(), m.ncols())));
        }
        if width > 32 || m.nrows() != 1usize << width {
            return Err(Error::Shape(format!(
                "matrix dimension {} does not match width {width}",
                m.nrows()
            )));
        }
        let dim = m.nrows();
        let norm = 1.0 / dim as f64;
        let mut out = PauliSum::zero(width);
        let mut v = vec![C64::default(); dim];
        for x in 0..dim {
            for (b, slot) in v.iter_mut().enumerate() {
                *slot = m[(b ^ x, b)];
            }
            walsh_hadamard(&mut v);
            for (z, &acc) in v.iter().enumerate() {
                let ny = ((x & z) as u64).count_ones();
                // conj(i^ny) = i^(3·ny)
                let c = acc * i_pow(3 * ny) * norm;
                if c.norm() >= tol {
                    out.add_term(PauliString::from_masks(width, x as u64, z as u64), c);
                }
            }
        }
        Ok(out)
    }

    /// `P|ψ⟩` without densifying the operator.
    pub fn apply(&self, state: &[C64]) -> Result<Vec<C64>> {
        let dim = self.check_state_dim(state)?;
        let mut out = vec![C64::default(); dim];
        for (p, c) in &self.terms {
            for (b, amp) in state.iter().enumerate() {
                let (row, phase) = p.apply_to_basis(b);
                out[row] += c * phase * amp;
            }
        }
        Ok(out)
    }

    fn check_state_dim(&self, state: &[C64]) -> Result<usize> {
        let dim = 1usize << self.width;
        if state.len() != dim {
            return Err(Error::Dimension { expected: dim, got: state.len() });
        }
        Ok(dim)
    }

    /// `⟨ψ|P|ψ⟩` for a normalized state, evaluated string by string.
    pub fn expectation(&self, state: &[C64]) -> Result<C64> {
        self.check_state_dim(state)?;
        let norm = state.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::Norm(norm));
        }
        let mut total = C64::default();
        for (p, c) in &self.terms {
            let mut acc = C64::default();
            for (b, amp) in state.iter().enumerate() {
                let (row, phase) = p.apply_to_basis(b);
                acc += state[row].conj() * phase * amp;
            }
            total += c * acc;
        }
        Ok(total)
    }

    /// One term per line: `<re> <im> <letters>`. Coefficients use the shortest
    /// representation that parses back to the same `f64`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (p, c) in &self.terms {
            s.push_str(&format!("{:?} {:?} {}\n", c.re, c.im, p));
        }
        s
    }

    /// Parses [`PauliSum::to_text`] output. Blank lines and `#` comments are
    /// skipped. `width` is needed for the empty sum.
    pub fn from_text(text: &str, width: usize) -> Result<PauliSum> {
        let mut out = PauliSum::zero(width);
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::Parse(format!("line {}: expected 3 fields", lineno + 1)));
            }
            let parse = |f: &str| {
                f.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            };
            let c = C64::new(parse(fields[0])?, parse(fields[1])?);
            let p: PauliString = fields[2].parse()?;
            if p.width() != width {
                return Err(Error::WidthMismatch { left: width, right: p.width() });
            }
            out.add_term(p, c);
        }
        Ok(out)
    }
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (p, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if c.im == 0.0 {
                write!(f, "{}·{}", c.re, p)?;
            } else {
                write!(f, "({}{:+}i)·{}", c.re, c.im, p)?;
            }
        }
        Ok(())
    }
}

fn walsh_hadamard(v: &mut [Complex64]) {
    let n = v.len();
    let mut h = 1;
    while h < n {
        for i in (0..n).step_by(2 * h) {
            for j in i..i + h {
                let (a, b) = (v[j], v[j + h]);
                v[j] = a + b;
                v[j + h] = a - b;
            }
        }
        h *= 2;
    }
}

/// Total spin of a register of spin-½ qubits: `S^α = ½ Σ_q σ^α_q`.
pub fn total_spin_component(width: usize, p: Pauli) -> PauliSum {
    let mut s = PauliSum::zero(width);
    for q in 0..width {
        s.add_term(PauliString::single(width, q, p), C64::new(0.5, 0.0));
    }
    s
}

/// `S_tot² = (S^x)² + (S^y)² + (S^z)²` on a qubit register.
pub fn total_spin_squared(width: usize) -> PauliSum {
    let mut out = PauliSum::zero(width);
    for p in [Pauli::X, Pauli::Y, Pauli::Z] {
        let s = total_spin_component(width, p);
        out = out.add(&s.multiply(&s).expect("same width")).expect("same width");
    }
    out
}
