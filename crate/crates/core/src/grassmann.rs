//! Finite Grassmann algebra over real coefficients, Berezin integration and
//! the fermionic path distribution.
//!
//! A monomial `g_{i1} g_{i2} … g_{ik}` with `i1 < i2 < … < ik` is stored as a
//! bitmask. Integration follows the left-derivative rule
//! `∫ dg_i (g_i X) = X`, so `∫ dg_i` of a monomial first anticommutes `g_i` to
//! the front. Iterated integrals act innermost first: `∫dg_1 ∫dg_2 X` is
//! `berezin_integral(X, &[2, 1])`, and the measure `d(g_1, g_2)` denotes the
//! same operation.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_GENERATORS: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrassmannError {
    #[error("at most {MAX_GENERATORS} generators supported, got {0}")]
    TooManyGenerators(usize),
    #[error("generator index {index} out of range for {n} generators")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("operands have {0} and {1} generators")]
    GeneratorMismatch(usize, usize),
    #[error("repeated generator {0} in measure")]
    RepeatedGenerator(usize),
    #[error("{0} is not odd-graded")]
    NotOdd(&'static str),
    #[error("coefficient {0} outside [-1, 1]")]
    CoefficientOutOfRange(f64),
    #[error("malformed element: {0}")]
    Malformed(String),
}

pub type Result<T> = std::result::Result<T, GrassmannError>;

/// Sign of `m_a m_b` relative to the sorted monomial `m_{a ∪ b}`, or 0 when
/// they share a generator.
pub fn monomial_sign(a: u32, b: u32) -> i32 {
    if a & b != 0 {
        return 0;
    }
    let mut swaps = 0u32;
    let mut rest = b;
    while rest != 0 {
        let j = rest.trailing_zeros();
        swaps += (a >> (j + 1)).count_ones();
        rest &= rest - 1;
    }
    if swaps % 2 == 0 {
        1
    } else {
        -1
    }
}

fn indices_of(mask: u32) -> Vec<usize> {
    (0..32).filter(|i| mask >> i & 1 == 1).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrassmannElement {
    n: usize,
    terms: BTreeMap<u32, f64>,
}

impl GrassmannElement {
    pub fn zero(n_generators: usize) -> Result<Self> {
        if n_generators > MAX_GENERATORS {
            return Err(GrassmannError::TooManyGenerators(n_generators));
        }
        Ok(Self {
            n: n_generators,
            terms: BTreeMap::new(),
        })
    }

    pub fn scalar(n_generators: usize, c: f64) -> Result<Self> {
        let mut z = Self::zero(n_generators)?;
        z.insert(0, c);
        Ok(z)
    }

    pub fn one(n_generators: usize) -> Result<Self> {
        Self::scalar(n_generators, 1.0)
    }

    pub fn generator(n_generators: usize, index: usize) -> Result<Self> {
        Self::monomial(n_generators, &[index], 1.0)
    }

    /// `coeff · g_{i1} g_{i2} …` in the given (not necessarily sorted) order.
    pub fn monomial(n_generators: usize, indices: &[usize], coeff: f64) -> Result<Self> {
        let mut z = Self::zero(n_generators)?;
        let mut mask = 0u32;
        let mut sign = 1;
        for &i in indices {
            if i >= n_generators {
                return Err(GrassmannError::IndexOutOfRange {
                    index: i,
                    n: n_generators,
                });
            }
            sign *= monomial_sign(mask, 1 << i);
            mask |= 1 << i;
        }
        if sign != 0 {
            z.insert(mask, sign as f64 * coeff);
        }
        Ok(z)
    }

    pub fn from_terms(
        n_generators: usize,
        terms: impl IntoIterator<Item = (u32, f64)>,
    ) -> Result<Self> {
        let mut z = Self::zero(n_generators)?;
        let limit = if n_generators == 32 {
            u32::MAX
        } else {
            (1u32 << n_generators) - 1
        };
        for (mask, c) in terms {
            if mask & !limit != 0 {
                return Err(GrassmannError::IndexOutOfRange {
                    index: 31 - mask.leading_zeros() as usize,
                    n: n_generators,
                });
            }
            z.insert(mask, c);
        }
        Ok(z)
    }

    fn insert(&mut self, mask: u32, c: f64) {
        let v = self.terms.get(&mask).copied().unwrap_or(0.0) + c;
        if v == 0.0 {
            self.terms.remove(&mask);
        } else {
            self.terms.insert(mask, v);
        }
    }

    pub fn n_generators(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.terms.iter().map(|(&m, &c)| (m, c))
    }

    pub fn coefficient(&self, mask: u32) -> f64 {
        self.terms.get(&mask).copied().unwrap_or(0.0)
    }

    pub fn scalar_part(&self) -> f64 {
        self.coefficient(0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Every term has odd degree; zero counts as odd.
    pub fn is_odd(&self) -> bool {
        self.terms.keys().all(|m| m.count_ones() % 2 == 1)
    }

    pub fn is_even(&self) -> bool {
        self.terms.keys().all(|m| m.count_ones() % 2 == 0)
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.values().fold(0.0, |a, c| a.max(c.abs()))
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = Self {
            n: self.n,
            terms: BTreeMap::new(),
        };
        for (&m, &v) in &self.terms {
            out.insert(m, c * v);
        }
        out
    }

    fn same_n(&self, other: &Self) -> Result<()> {
        if self.n == other.n {
            Ok(())
        } else {
            Err(GrassmannError::GeneratorMismatch(self.n, other.n))
        }
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.same_n(other)?;
        let mut out = self.clone();
        for (&m, &c) in &other.terms {
            out.insert(m, c);
        }
        Ok(out)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.try_add(&other.scale(-1.0))
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let w = WireElement::from(self);
        serde_json::to_value(w).expect("element serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let w: WireElement =
            serde_json::from_str(text).map_err(|e| GrassmannError::Malformed(e.to_string()))?;
        Self::try_from(w)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireTerm {
    indices: Vec<usize>,
    coeff: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireElement {
    n_generators: usize,
    terms: Vec<WireTerm>,
}

impl From<&GrassmannElement> for WireElement {
    fn from(x: &GrassmannElement) -> Self {
        Self {
            n_generators: x.n,
            terms: x
                .terms()
                .map(|(m, c)| WireTerm {
                    indices: indices_of(m),
                    coeff: c,
                })
                .collect(),
        }
    }
}

impl TryFrom<WireElement> for GrassmannElement {
    type Error = GrassmannError;

    fn try_from(w: WireElement) -> Result<Self> {
        let mut out = Self::zero(w.n_generators)?;
        for t in w.terms {
            let m = Self::monomial(w.n_generators, &t.indices, t.coeff)?;
            if m.is_zero() && t.coeff != 0.0 {
                return Err(GrassmannError::Malformed(format!(
                    "repeated generator in {:?}",
                    t.indices
                )));
            }
            out = out.try_add(&m)?;
        }
        Ok(out)
    }
}

impl Serialize for GrassmannElement {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        WireElement::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for GrassmannElement {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = WireElement::deserialize(d)?;
        Self::try_from(w).map_err(serde::de::Error::custom)
    }
}

/// Graded product.
pub fn g_product(x: &GrassmannElement, y: &GrassmannElement) -> Result<GrassmannElement> {
    x.same_n(y)?;
    let mut out = GrassmannElement::zero(x.n)?;
    for (&a, &ca) in &x.terms {
        for (&b, &cb) in &y.terms {
            let s = monomial_sign(a, b);
            if s != 0 {
                out.insert(a | b, s as f64 * ca * cb);
            }
        }
    }
    Ok(out)
}

/// `xy + yx`.
pub fn anticommutator(x: &GrassmannElement, y: &GrassmannElement) -> Result<GrassmannElement> {
    g_product(x, y)?.try_add(&g_product(y, x)?)
}

impl Add for &GrassmannElement {
    type Output = GrassmannElement;

    fn add(self, rhs: Self) -> GrassmannElement {
        self.try_add(rhs).expect("generator counts differ")
    }
}

impl Sub for &GrassmannElement {
    type Output = GrassmannElement;

    fn sub(self, rhs: Self) -> GrassmannElement {
        self.try_sub(rhs).expect("generator counts differ")
    }
}

impl Mul for &GrassmannElement {
    type Output = GrassmannElement;

    fn mul(self, rhs: Self) -> GrassmannElement {
        g_product(self, rhs).expect("generator counts differ")
    }
}

impl Neg for &GrassmannElement {
    type Output = GrassmannElement;

    fn neg(self) -> GrassmannElement {
        self.scale(-1.0)
    }
}

fn integrate_one(x: &GrassmannElement, i: usize) -> Result<GrassmannElement> {
    if i >= x.n {
        return Err(GrassmannError::IndexOutOfRange { index: i, n: x.n });
    }
    let bit = 1u32 << i;
    let mut out = GrassmannElement::zero(x.n)?;
    for (&m, &c) in &x.terms {
        if m & bit != 0 {
            let before = (m & (bit - 1)).count_ones();
            let s = if before % 2 == 0 { 1.0 } else { -1.0 };
            out.insert(m ^ bit, s * c);
        }
    }
    Ok(out)
}

/// `∫ dg_{innermost_first[k-1]} … ∫ dg_{innermost_first[0]} x`.
pub fn berezin_integral(
    x: &GrassmannElement,
    innermost_first: &[usize],
) -> Result<GrassmannElement> {
    let mut acc = x.clone();
    for &i in innermost_first {
        acc = integrate_one(&acc, i)?;
    }
    Ok(acc)
}

/// `∫ d(g_{i1}, …, g_{ik}) x` in one step: a term
/// `g_{i1} … g_{ik} Y` maps to `(-1)^{k(k-1)/2} Y`. Equivalent to
/// `berezin_integral(x, measure reversed)`.
pub fn berezin_measure_integral(
    x: &GrassmannElement,
    measure: &[usize],
) -> Result<GrassmannElement> {
    let mut set = 0u32;
    for &i in measure {
        if i >= x.n {
            return Err(GrassmannError::IndexOutOfRange { index: i, n: x.n });
        }
        if set >> i & 1 == 1 {
            return Err(GrassmannError::RepeatedGenerator(i));
        }
        set |= 1 << i;
    }
    let k = measure.len();
    let reversal = if (k * k.saturating_sub(1) / 2) % 2 == 0 {
        1
    } else {
        -1
    };
    let mut ordered_sign = 1;
    let mut mask = 0u32;
    for &i in measure {
        ordered_sign *= monomial_sign(mask, 1 << i);
        mask |= 1 << i;
    }
    let mut out = GrassmannElement::zero(x.n)?;
    for (&m, &c) in &x.terms {
        if m & set != set {
            continue;
        }
        let rest = m & !set;
        let s = ordered_sign * monomial_sign(set, rest) * reversal;
        out.insert(rest, s as f64 * c);
    }
    Ok(out)
}

fn check_distribution_input(x: &GrassmannElement, name: &'static str) -> Result<()> {
    if !x.is_odd() {
        return Err(GrassmannError::NotOdd(name));
    }
    if let Some((_, c)) = x.terms().find(|(_, c)| c.abs() > 1.0) {
        return Err(GrassmannError::CoefficientOutOfRange(c));
    }
    Ok(())
}

/// Identities of the product `αβ` of two odd elements.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FermionPathReport {
    pub probability: GrassmannElement,
    pub reverse: GrassmannElement,
    pub alpha_squared: GrassmannElement,
    pub beta_squared: GrassmannElement,
    pub anticommutator: GrassmannElement,
}

impl FermionPathReport {
    pub fn squares_vanish(&self) -> bool {
        self.alpha_squared.is_zero() && self.beta_squared.is_zero()
    }

    pub fn anticommutes(&self) -> bool {
        self.anticommutator.is_zero()
    }
}

pub fn fermion_path_probability(
    alpha: &GrassmannElement,
    beta: &GrassmannElement,
) -> Result<FermionPathReport> {
    alpha.same_n(beta)?;
    check_distribution_input(alpha, "alpha")?;
    check_distribution_input(beta, "beta")?;
    Ok(FermionPathReport {
        probability: g_product(alpha, beta)?,
        reverse: g_product(beta, alpha)?,
        alpha_squared: g_product(alpha, alpha)?,
        beta_squared: g_product(beta, beta)?,
        anticommutator: anticommutator(alpha, beta)?,
    })
}

/// `∫ d(measure) (Σ_j α_j)(Σ_j β_j)`.
pub fn fermion_total_probability(
    alphas: &[GrassmannElement],
    betas: &[GrassmannElement],
    measure: &[usize],
) -> Result<GrassmannElement> {
    let n = alphas
        .first()
        .or(betas.first())
        .map(|x| x.n)
        .ok_or_else(|| GrassmannError::Malformed("no path amplitudes".into()))?;
    let mut a = GrassmannElement::zero(n)?;
    for x in alphas {
        check_distribution_input(x, "alpha")?;
        a = a.try_add(x)?;
    }
    let mut b = GrassmannElement::zero(n)?;
    for y in betas {
        check_distribution_input(y, "beta")?;
        b = b.try_add(y)?;
    }
    berezin_measure_integral(&g_product(&a, &b)?, measure)
}

/// Random element with dyadic coefficients `k/64`, `k ∈ [-64, 64]`, on
/// monomials of the requested parity.
pub fn random_element<R: Rng>(
    rng: &mut R,
    n_generators: usize,
    odd: bool,
    density: f64,
) -> Result<GrassmannElement> {
    let mut out = GrassmannElement::zero(n_generators)?;
    for mask in 0u32..(1u32 << n_generators) {
        if (mask.count_ones() % 2 == 1) != odd {
            continue;
        }
        if rng.gen::<f64>() < density {
            out.insert(mask, rng.gen_range(-64i32..=64) as f64 / 64.0);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub cases: u64,
    pub failures: u64,
}

impl IdentityCheck {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Identity suite: exhaustive associativity over basis monomials up to
/// `exhaustive_n` generators, the single-generator Berezin rules, and seeded
/// random checks of nilpotency, anticommutation and integration order on
/// `n_generators`.
/// `sabotage` flips the sign of one product so that a failure is reported.
pub fn identity_suite(
    n_generators: usize,
    exhaustive_n: usize,
    draws: usize,
    seed: u64,
    sabotage: bool,
) -> Result<Vec<IdentityCheck>> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();

    let basis: u32 = 1 << exhaustive_n;
    let mut failures = 0;
    let mut cases = 0;
    for a in 0..basis {
        let x = GrassmannElement::from_terms(exhaustive_n, [(a, 1.0)])?;
        for b in 0..basis {
            let y = GrassmannElement::from_terms(exhaustive_n, [(b, 1.0)])?;
            let xy = g_product(&x, &y)?;
            for c in 0..basis {
                let z = GrassmannElement::from_terms(exhaustive_n, [(c, 1.0)])?;
                cases += 1;
                if g_product(&xy, &z)? != g_product(&x, &g_product(&y, &z)?)? {
                    failures += 1;
                }
            }
        }
    }
    checks.push(IdentityCheck {
        name: "associativity".into(),
        cases,
        failures,
    });

    let mut rules = IdentityCheck {
        name: "berezin-rules".into(),
        cases: 0,
        failures: 0,
    };
    let one = GrassmannElement::one(n_generators)?;
    for i in 0..n_generators {
        rules.cases += 2;
        if berezin_integral(&GrassmannElement::generator(n_generators, i)?, &[i])? != one {
            rules.failures += 1;
        }
        if !berezin_integral(&one, &[i])?.is_zero() {
            rules.failures += 1;
        }
    }
    checks.push(rules);

    let mut nil = IdentityCheck {
        name: "odd-square-vanishes".into(),
        cases: 0,
        failures: 0,
    };
    let mut anti = IdentityCheck {
        name: "odd-anticommute".into(),
        cases: 0,
        failures: 0,
    };
    let mut order = IdentityCheck {
        name: "integration-order".into(),
        cases: 0,
        failures: 0,
    };
    let mut sign = IdentityCheck {
        name: "measure-reordering-sign".into(),
        cases: 0,
        failures: 0,
    };
    for d in 0..draws {
        let alpha = random_element(&mut rng, n_generators, true, 0.5)?;
        let beta = random_element(&mut rng, n_generators, true, 0.5)?;
        let mut report = fermion_path_probability(&alpha, &beta)?;
        if sabotage && d == 0 {
            report.reverse = report.reverse.scale(-1.0);
            report.anticommutator = report.probability.try_add(&report.reverse)?;
            if report.anticommutator.is_zero() {
                report.anticommutator = GrassmannElement::scalar(n_generators, 1.0)?;
            }
        }
        nil.cases += 1;
        if !report.squares_vanish() {
            nil.failures += 1;
        }
        anti.cases += 1;
        if !report.anticommutes() {
            anti.failures += 1;
        }

        if n_generators >= 2 {
            let i = rng.gen_range(0..n_generators);
            let mut j = rng.gen_range(0..n_generators - 1);
            if j >= i {
                j += 1;
            }
            let x = random_element(&mut rng, n_generators, d % 2 == 0, 0.5)?;
            order.cases += 1;
            if berezin_integral(&x, &[j, i])? != berezin_measure_integral(&x, &[i, j])? {
                order.failures += 1;
            }
            sign.cases += 1;
            let swapped = berezin_measure_integral(&x, &[j, i])?;
            if berezin_measure_integral(&x, &[i, j])? != swapped.scale(-1.0) {
                sign.failures += 1;
            }
        }
    }
    checks.extend([nil, anti, order, sign]);
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn gen(n: usize, i: usize) -> GrassmannElement {
        GrassmannElement::generator(n, i).unwrap()
    }

    #[test]
    fn spec_products() {
        let (g1, g2) = (gen(2, 0), gen(2, 1));
        assert!(g_product(&g1, &g1).unwrap().is_zero());
        let ab = g_product(&g1, &g2).unwrap();
        let ba = g_product(&g2, &g1).unwrap();
        assert_eq!(ab.coefficient(0b11), 1.0);
        assert_eq!(ba.coefficient(0b11), -1.0);
        assert!(anticommutator(&g1, &g2).unwrap().is_zero());
    }

    #[test]
    fn spec_integrals() {
        let (g1, g2) = (gen(2, 0), gen(2, 1));
        let one = GrassmannElement::one(2).unwrap();
        assert!(berezin_integral(&one, &[0]).unwrap().is_zero());
        assert_eq!(berezin_integral(&g1, &[0]).unwrap(), one);
        let g12 = g_product(&g1, &g2).unwrap();
        let inner_then_outer = berezin_integral(&g12, &[1, 0]).unwrap();
        assert_eq!(inner_then_outer.scalar_part(), -1.0);
        assert_eq!(
            berezin_measure_integral(&g12, &[0, 1]).unwrap(),
            inner_then_outer
        );
    }

    #[test]
    fn scalar_integration_vanishes() {
        let c = GrassmannElement::scalar(3, 0.75).unwrap();
        for i in 0..3 {
            assert!(berezin_integral(&c, &[i]).unwrap().is_zero());
        }
    }

    #[test]
    fn monomial_sign_matches_transpositions() {
        let m = GrassmannElement::monomial(4, &[3, 1, 2], 1.0).unwrap();
        assert_eq!(m.coefficient(0b1110), 1.0);
        let m = GrassmannElement::monomial(4, &[3, 2, 1], 1.0).unwrap();
        assert_eq!(m.coefficient(0b1110), -1.0);
        assert!(GrassmannElement::monomial(4, &[1, 1], 1.0)
            .unwrap()
            .is_zero());
    }

    #[test]
    fn measure_sign_closed_form() {
        for k in 1..=6usize {
            let idx: Vec<usize> = (0..k).collect();
            let mut y_idx = vec![7];
            let mut full = idx.clone();
            full.append(&mut y_idx);
            let x = GrassmannElement::monomial(8, &full, 1.0).unwrap();
            let r = berezin_measure_integral(&x, &idx).unwrap();
            let expected = if (k * (k - 1) / 2) % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            assert_eq!(r.coefficient(1 << 7), expected, "k = {k}");
        }
    }

    #[test]
    fn json_round_trip() {
        let x = GrassmannElement::monomial(4, &[2, 0], 0.5)
            .unwrap()
            .try_add(&gen(4, 3))
            .unwrap();
        let text = x.to_json_value().to_string();
        assert_eq!(GrassmannElement::from_json_str(&text).unwrap(), x);
        assert!(GrassmannElement::from_json_str(
            r#"{"n_generators":2,"terms":[{"indices":[0,0],"coeff":1}]}"#
        )
        .is_err());
        assert!(GrassmannElement::from_json_str(r#"{"n_generators":17,"terms":[]}"#).is_err());
    }

    #[test]
    fn distribution_rejects_even_input() {
        let even = GrassmannElement::scalar(2, 0.5).unwrap();
        let odd = gen(2, 0);
        assert_eq!(
            fermion_path_probability(&even, &odd).unwrap_err(),
            GrassmannError::NotOdd("alpha")
        );
        let big = gen(2, 1).scale(2.0);
        assert!(matches!(
            fermion_path_probability(&odd, &big).unwrap_err(),
            GrassmannError::CoefficientOutOfRange(_)
        ));
    }

    #[test]
    fn total_probability_over_measure() {
        let n = 4;
        let alphas = [gen(n, 0), gen(n, 2)];
        let betas = [gen(n, 1)];
        let t = fermion_total_probability(&alphas, &betas, &[0, 1]).unwrap();
        assert_eq!(t, GrassmannElement::scalar(n, -1.0).unwrap());
    }

    #[test]
    fn suite_passes_and_sabotage_fails() {
        let ok = identity_suite(6, 4, 40, 7, false).unwrap();
        assert!(ok.iter().all(IdentityCheck::passed), "{ok:?}");
        let bad = identity_suite(6, 2, 5, 7, true).unwrap();
        assert!(bad.iter().any(|c| !c.passed()));
    }

    #[test]
    fn random_elements_have_requested_parity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            assert!(random_element(&mut rng, 6, true, 0.5).unwrap().is_odd());
            assert!(random_element(&mut rng, 6, false, 0.5).unwrap().is_even());
        }
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    proptest! {
        #[test]
        fn odd_elements_square_to_zero_and_anticommute(seed in any::<u64>(), n in 1usize..=8) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let a = random_element(&mut rng, n, true, 0.6).unwrap();
            let b = random_element(&mut rng, n, true, 0.6).unwrap();
            prop_assert!(g_product(&a, &a).unwrap().is_zero());
            prop_assert!(anticommutator(&a, &b).unwrap().is_zero());
        }

        #[test]
        fn product_is_associative(seed in any::<u64>(), n in 1usize..=7) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x = random_element(&mut rng, n, seed % 2 == 0, 0.4).unwrap()
                .try_add(&random_element(&mut rng, n, seed % 2 == 1, 0.4).unwrap()).unwrap();
            let y = random_element(&mut rng, n, true, 0.4).unwrap();
            let z = random_element(&mut rng, n, false, 0.4).unwrap();
            let left = g_product(&g_product(&x, &y).unwrap(), &z).unwrap();
            let right = g_product(&x, &g_product(&y, &z).unwrap()).unwrap();
            prop_assert_eq!(left, right);
        }

        #[test]
        fn iterated_and_measure_integrals_agree(seed in any::<u64>(), n in 2usize..=8) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x = random_element(&mut rng, n, seed % 2 == 0, 0.5).unwrap();
            let i = (seed as usize) % n;
            let j = (i + 1 + (seed as usize / n) % (n - 1)) % n;
            prop_assert_eq!(
                berezin_integral(&x, &[j, i]).unwrap(),
                berezin_measure_integral(&x, &[i, j]).unwrap()
            );
        }
    }
}
