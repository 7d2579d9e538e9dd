//! Stationary system of the linearized elevation error, Sylvester-resultant
//! elimination, and real root extraction.
//!
//! The squared elevation discrepancies linearize to
//! `E_phi ~ sum_i (k_i * s_i - m_i)^2` with `s_i = dx_i^2 + dy_i^2`,
//! `k_i = sin^3(phi_i) / (p_iz^2 cos(phi_i))` and
//! `m_i = sin(phi_i) cos(phi_i)`. Its gradient is a pair of bivariate cubics
//! `A = dE/dx`, `B = dE/dy` whose coefficients share structure; eliminating
//! either variable with a Sylvester resultant leaves a univariate polynomial
//! whose terms above degree 5 cancel. Candidate camera positions are the
//! Cartesian product of the two resultants' real roots.

use nalgebra::{DMatrix, DVector};

/// Coefficient-poly entries smaller than this times the system scale are
/// treated as structurally zero when choosing Sylvester matrix degrees.
const DEGREE_TRIM_EPS: f64 = 1e-12;

/// Relative bound the fitted degree 6..9 coefficients must satisfy before
/// truncation to degree 5.
const RESULTANT_TAIL_TOL: f64 = 1e-8;

/// Leading coefficients below this times the max coefficient are stripped
/// before root finding.
const LEADING_COEFF_EPS: f64 = 1e-12;

/// Eigenvalues with relative imaginary part above this are discarded.
const IMAGINARY_ROOT_TOL: f64 = 1e-6;

/// Roots closer than this (relative) spacing collapse into one.
const ROOT_DEDUP_SPACING: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum PolysolveError {
    /// Fewer than two points survived the sign/cosine filter.
    TooFewValidTerms { retained: usize },
    /// The resultant is numerically the zero polynomial (degenerate geometry,
    /// e.g. all points coincident).
    DegenerateResultant,
    /// All polynomial coefficients vanish.
    ZeroPolynomial,
    /// One of the resultants has no real roots.
    NoCandidates,
}

impl std::fmt::Display for PolysolveError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PolysolveError::TooFewValidTerms { retained } => write!(
                f,
                "cubic system needs at least 2 usable elevation terms, got {retained}"
            ),
            PolysolveError::DegenerateResultant => {
                write!(f, "resultant is numerically zero (degenerate point geometry)")
            }
            PolysolveError::ZeroPolynomial => write!(f, "all polynomial coefficients vanish"),
            PolysolveError::NoCandidates => write!(f, "a resultant produced no real roots"),
        }
    }
}

impl std::error::Error for PolysolveError {}

/// Dense univariate real polynomial, coefficients in ascending degree.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly1D {
    pub coeffs: Vec<f64>,
}

impl Poly1D {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    /// Degree after stripping near-zero leading coefficients.
    pub fn degree(&self) -> usize {
        let scale = self.coeff_scale();
        if scale == 0.0 {
            return 0;
        }
        let mut deg = self.coeffs.len().saturating_sub(1);
        while deg > 0 && self.coeffs[deg].abs() < LEADING_COEFF_EPS * scale {
            deg -= 1;
        }
        deg
    }

    pub fn coeff_scale(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// Horner evaluation of the polynomial and its derivative.
    pub fn eval_with_derivative(&self, x: f64) -> (f64, f64) {
        let mut value = 0.0;
        let mut derivative = 0.0;
        for &c in self.coeffs.iter().rev() {
            derivative = derivative * x + value;
            value = value * x + c;
        }
        (value, derivative)
    }
}

/// One world point with its observed elevation, as consumed by
/// [`build_system`].
///
/// `phi` is the elevation of the point above the camera's plane of motion as
/// observed, i.e. the negated elevation of the object-to-camera
/// [`RectifiedRay`](crate::geometry::RectifiedRay). Consistent observations
/// have `sign(phi) = sign(pz)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElevationTerm {
    pub px: f64,
    pub py: f64,
    pub pz: f64,
    pub phi: f64,
}

/// Which variable the Sylvester resultant eliminates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EliminationAxis {
    X,
    Y,
}

/// Expanded coefficients of the gradient cubics
/// `A = c1 x^3 + c1 x y^2 + 3 c2 x^2 + 2 c3 x y + c2 y^2 + a1 x + c4 y + a2`
/// and
/// `B = c1 y^3 + c1 x^2 y + 3 c3 y^2 + 2 c2 x y + c3 x^2 + b1 y + c4 x + b2`,
/// plus the per-point weights and retained indices that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSystem {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    /// `(k_i, m_i)` for each retained term, aligned with `retained`.
    pub weights: Vec<(f64, f64)>,
    /// Indices into the input term list that survived the filter.
    pub retained: Vec<usize>,
    /// Centroid of the retained points, used to scale resultant sampling.
    centroid: (f64, f64),
    /// Half-width of the interval guaranteed to contain the stationary set.
    sample_radius: f64,
}

impl CubicSystem {
    pub fn eval_a(&self, x: f64, y: f64) -> f64 {
        self.c1 * x * x * x
            + self.c1 * x * y * y
            + 3.0 * self.c2 * x * x
            + 2.0 * self.c3 * x * y
            + self.c2 * y * y
            + self.a1 * x
            + self.c4 * y
            + self.a2
    }

    pub fn eval_b(&self, x: f64, y: f64) -> f64 {
        self.c1 * y * y * y
            + self.c1 * x * x * y
            + 3.0 * self.c3 * y * y
            + 2.0 * self.c2 * x * y
            + self.c3 * x * x
            + self.b1 * y
            + self.c4 * x
            + self.b2
    }

    /// `A` as a polynomial in the eliminated variable, coefficients ascending,
    /// each a polynomial (ascending) in the surviving variable.
    fn a_in(&self, axis: EliminationAxis) -> Vec<Vec<f64>> {
        match axis {
            // A in y: [c1 x^3 + 3 c2 x^2 + a1 x + a2, 2 c3 x + c4, c1 x + c2]
            EliminationAxis::Y => vec![
                vec![self.a2, self.a1, 3.0 * self.c2, self.c1],
                vec![self.c4, 2.0 * self.c3],
                vec![self.c2, self.c1],
            ],
            // A in x: [c2 y^2 + c4 y + a2, c1 y^2 + 2 c3 y + a1, 3 c2, c1]
            EliminationAxis::X => vec![
                vec![self.a2, self.c4, self.c2],
                vec![self.a1, 2.0 * self.c3, self.c1],
                vec![3.0 * self.c2],
                vec![self.c1],
            ],
        }
    }

    fn b_in(&self, axis: EliminationAxis) -> Vec<Vec<f64>> {
        match axis {
            // B in y: [c3 x^2 + c4 x + b2, c1 x^2 + 2 c2 x + b1, 3 c3, c1]
            EliminationAxis::Y => vec![
                vec![self.b2, self.c4, self.c3],
                vec![self.b1, 2.0 * self.c2, self.c1],
                vec![3.0 * self.c3],
                vec![self.c1],
            ],
            // B in x: [c1 y^3 + 3 c3 y^2 + b1 y + b2, 2 c2 y + c4, c1 y + c3]
            EliminationAxis::X => vec![
                vec![self.b2, self.b1, 3.0 * self.c3, self.c1],
                vec![self.c4, 2.0 * self.c2],
                vec![self.c3, self.c1],
            ],
        }
    }

    fn coeff_scale(&self) -> f64 {
        [self.c1, self.c2, self.c3, self.c4, self.a1, self.a2, self.b1, self.b2]
            .iter()
            .fold(0.0f64, |m, c| m.max(c.abs()))
    }

    fn sample_interval(&self, axis: EliminationAxis) -> (f64, f64) {
        let center = match axis {
            EliminationAxis::Y => self.centroid.0,
            EliminationAxis::X => self.centroid.1,
        };
        (center, self.sample_radius)
    }

    /// Constructs a system directly from expanded coefficients. Intended for
    /// tests and degenerate toy systems; `build_system` is the usual entry.
    pub fn from_coefficients(
        coeffs: [f64; 8],
        centroid: (f64, f64),
        sample_radius: f64,
    ) -> Self {
        let [c1, c2, c3, c4, a1, a2, b1, b2] = coeffs;
        Self {
            c1,
            c2,
            c3,
            c4,
            a1,
            a2,
            b1,
            b2,
            weights: Vec::new(),
            retained: Vec::new(),
            centroid,
            sample_radius,
        }
    }
}

/// Expands the gradient of the linearized elevation error over all terms
/// where `pz` and `phi` agree in sign and `cos(phi)` is usable.
pub fn build_system(terms: &[ElevationTerm]) -> Result<CubicSystem, PolysolveError> {
    let mut retained = Vec::new();
    let mut weights = Vec::new();
    for (i, t) in terms.iter().enumerate() {
        if t.pz * t.phi <= 0.0 || t.phi.cos().abs() <= 1e-9 {
            continue;
        }
        let (sin_phi, cos_phi) = t.phi.sin_cos();
        let k = sin_phi * sin_phi * sin_phi / (t.pz * t.pz * cos_phi);
        let m = sin_phi * cos_phi;
        retained.push(i);
        weights.push((k, m));
    }
    if retained.len() < 2 {
        return Err(PolysolveError::TooFewValidTerms { retained: retained.len() });
    }

    // Accumulate moments of (px, py) weighted by k^2 and k*m up to degree 3.
    let mut sk2 = 0.0;
    let mut skm = 0.0;
    let mut sk2_px = 0.0;
    let mut sk2_py = 0.0;
    let mut sk2_pxx = 0.0;
    let mut sk2_pyy = 0.0;
    let mut sk2_pxy = 0.0;
    let mut skm_px = 0.0;
    let mut skm_py = 0.0;
    let mut sk2_px_ss = 0.0;
    let mut sk2_py_ss = 0.0;
    let mut max_radius2 = 0.0f64;
    for (&i, &(k, m)) in retained.iter().zip(&weights) {
        let t = &terms[i];
        let k2 = k * k;
        let ss = t.px * t.px + t.py * t.py;
        sk2 += k2;
        skm += k * m;
        sk2_px += k2 * t.px;
        sk2_py += k2 * t.py;
        sk2_pxx += k2 * t.px * t.px;
        sk2_pyy += k2 * t.py * t.py;
        sk2_pxy += k2 * t.px * t.py;
        skm_px += k * m * t.px;
        skm_py += k * m * t.py;
        sk2_px_ss += k2 * t.px * ss;
        sk2_py_ss += k2 * t.py * ss;
        // m/k = pz^2 cot^2 phi: the squared horizontal camera-point distance
        // implied by this observation.
        max_radius2 = max_radius2.max(m / k);
    }

    let n = retained.len() as f64;
    let centroid = (
        retained.iter().map(|&i| terms[i].px).sum::<f64>() / n,
        retained.iter().map(|&i| terms[i].py).sum::<f64>() / n,
    );
    let spread = retained
        .iter()
        .map(|&i| {
            (terms[i].px - centroid.0).abs().max((terms[i].py - centroid.1).abs())
        })
        .fold(0.0f64, f64::max);
    let sample_radius = max_radius2.max(0.0).sqrt() + spread + 1.0;

    Ok(CubicSystem {
        c1: 4.0 * sk2,
        c2: -4.0 * sk2_px,
        c3: -4.0 * sk2_py,
        c4: 8.0 * sk2_pxy,
        a1: 4.0 * (3.0 * sk2_pxx + sk2_pyy - skm),
        a2: -4.0 * sk2_px_ss + 4.0 * skm_px,
        b1: 4.0 * (3.0 * sk2_pyy + sk2_pxx - skm),
        b2: -4.0 * sk2_py_ss + 4.0 * skm_py,
        weights,
        retained,
        centroid,
        sample_radius,
    })
}

/// Resultant of the cubic system in the surviving variable, truncated to its
/// effective degree (<= 5).
pub fn sylvester_resultant(
    sys: &CubicSystem,
    eliminate: EliminationAxis,
) -> Result<Poly1D, PolysolveError> {
    fit_resultant(sys, eliminate).map(|(poly, _)| poly)
}

/// Like [`sylvester_resultant`] but also reports the largest degree 6..9
/// coefficient of the raw fit relative to the largest coefficient overall.
pub fn sylvester_resultant_with_tail(
    sys: &CubicSystem,
    eliminate: EliminationAxis,
) -> Result<(Poly1D, f64), PolysolveError> {
    fit_resultant(sys, eliminate)
}

/// Evaluates the Sylvester determinant of the system at scaled Chebyshev
/// abscissae and recovers the coefficients by a weighted least-squares fit
/// in the Chebyshev basis. The centered/scaled basis keeps the Vandermonde
/// well conditioned; the near-relative weights stop the large determinant
/// values at the interval edges from drowning out the root-bearing region.
/// Degrees 6..9 must come back negligible, confirming the structural degree
/// collapse before truncation.
fn fit_resultant(
    sys: &CubicSystem,
    eliminate: EliminationAxis,
) -> Result<(Poly1D, f64), PolysolveError> {
    let scale = sys.coeff_scale();
    if scale == 0.0 {
        return Err(PolysolveError::DegenerateResultant);
    }
    let a_polys = trim_coefficient_polys(sys.a_in(eliminate), scale);
    let b_polys = trim_coefficient_polys(sys.b_in(eliminate), scale);
    let deg_a = a_polys.len().saturating_sub(1);
    let deg_b = b_polys.len().saturating_sub(1);
    if a_polys.is_empty() || b_polys.is_empty() || deg_a + deg_b == 0 {
        return Err(PolysolveError::DegenerateResultant);
    }

    const SAMPLES: usize = 24;
    const FIT_DEGREE: usize = 9;
    let (center, radius) = sys.sample_interval(eliminate);

    let mut values = [0.0f64; SAMPLES];
    let mut nodes = [0.0f64; SAMPLES];
    let mut hadamard_scale = 0.0f64;
    for (j, (node, value)) in nodes.iter_mut().zip(values.iter_mut()).enumerate() {
        let t = ((2 * j + 1) as f64 / (2 * SAMPLES) as f64 * std::f64::consts::PI).cos();
        *node = t;
        let at = center + radius * t;
        *value = sylvester_determinant(&a_polys, &b_polys, at);
        hadamard_scale = hadamard_scale.max(determinant_magnitude_bound(&a_polys, &b_polys, at));
    }

    let value_scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    // A shared component makes the determinant vanish identically; what the
    // samples then hold is cancellation residue far below the entry scale.
    if value_scale == 0.0
        || !value_scale.is_finite()
        || value_scale < 1e-24 * hadamard_scale
    {
        return Err(PolysolveError::DegenerateResultant);
    }

    let mut design = DMatrix::zeros(SAMPLES, FIT_DEGREE + 1);
    let mut rhs = DVector::zeros(SAMPLES);
    for (j, (&t, &value)) in nodes.iter().zip(values.iter()).enumerate() {
        // Near-relative weight, normalized to [1, 1e3] so the singular
        // values of the design matrix sit far above the solve cutoff.
        let weight = value_scale / (value.abs() + 1e-3 * value_scale);
        let mut prev = 1.0;
        let mut curr = t;
        design[(j, 0)] = weight;
        design[(j, 1)] = weight * t;
        for d in 2..=FIT_DEGREE {
            let next = 2.0 * t * curr - prev;
            design[(j, d)] = weight * next;
            prev = curr;
            curr = next;
        }
        rhs[j] = weight * value / value_scale;
    }
    let cheb = design
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|_| PolysolveError::DegenerateResultant)?;

    // Chebyshev to monomial coefficients in the scaled variable t.
    let mut solved = [0.0f64; FIT_DEGREE + 1];
    let mut t_prev = vec![1.0f64];
    let mut t_curr = vec![0.0f64, 1.0];
    solved[0] += cheb[0];
    for (c, &b) in solved.iter_mut().zip(&t_curr) {
        *c += cheb[1] * b;
    }
    for d in 2..=FIT_DEGREE {
        let mut t_next = vec![0.0f64; d + 1];
        for (i, &c) in t_curr.iter().enumerate() {
            t_next[i + 1] += 2.0 * c;
        }
        for (i, &c) in t_prev.iter().enumerate() {
            t_next[i] -= c;
        }
        for (c, &b) in solved.iter_mut().zip(&t_next) {
            *c += cheb[d] * b;
        }
        t_prev = t_curr;
        t_curr = t_next;
    }

    let fit_scale = solved.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if fit_scale == 0.0 {
        return Err(PolysolveError::DegenerateResultant);
    }
    let tail_ratio = solved.iter().skip(6).fold(0.0f64, |m, c| m.max(c.abs())) / fit_scale;

    // Truncate in the scaled basis, then expand back to the original
    // variable: p(x) = sum a_d ((x - center)/radius)^d. Systems produced by
    // `build_system` always satisfy the degree-5 collapse; a hand-built
    // system that does not keeps its full fitted degree.
    let keep = if tail_ratio < RESULTANT_TAIL_TOL { 6 } else { FIT_DEGREE + 1 };
    let truncated: Vec<f64> = solved.iter().take(keep).copied().collect();
    let mut coeffs = vec![0.0f64; keep];
    let shift = [-center / radius, 1.0 / radius];
    let mut basis = vec![1.0f64];
    for (d, &a_d) in truncated.iter().enumerate() {
        for (c, &b) in coeffs.iter_mut().zip(&basis) {
            *c += a_d * b;
        }
        if d < truncated.len() - 1 {
            basis = poly_mul(&basis, &shift);
        }
    }

    let max_coeff = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if max_coeff == 0.0 {
        return Err(PolysolveError::DegenerateResultant);
    }
    Ok((Poly1D::new(coeffs), tail_ratio))
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Drops identically-zero leading coefficient polynomials so the Sylvester
/// matrix is built at the actual degrees.
fn trim_coefficient_polys(mut polys: Vec<Vec<f64>>, scale: f64) -> Vec<Vec<f64>> {
    while let Some(last) = polys.last() {
        if last.iter().all(|c| c.abs() <= DEGREE_TRIM_EPS * scale) {
            polys.pop();
        } else {
            break;
        }
    }
    polys
}

fn eval_coeff(poly: &[f64], x: f64) -> f64 {
    poly.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Hadamard bound on the Sylvester determinant magnitude at `x`: the product
/// of the row 2-norms (each coefficient list fills `deg` rows).
fn determinant_magnitude_bound(a_polys: &[Vec<f64>], b_polys: &[Vec<f64>], x: f64) -> f64 {
    let norm = |polys: &[Vec<f64>]| -> f64 {
        polys.iter().map(|p| eval_coeff(p, x).powi(2)).sum::<f64>().sqrt()
    };
    let deg_a = a_polys.len() - 1;
    let deg_b = b_polys.len() - 1;
    norm(a_polys).powi(deg_b as i32) * norm(b_polys).powi(deg_a as i32)
}

/// Determinant of the Sylvester matrix of the two coefficient lists, each
/// evaluated at `x` in the eliminated-variable sense.
///
/// One observation with a near-vertical elevation gives its term an enormous
/// weight, which drives the two cubics toward a common factor and the
/// determinant toward total cancellation. Ordinary f64 elimination then
/// returns rounding noise, so the elimination runs in compensated
/// double-double arithmetic.
fn sylvester_determinant(a_polys: &[Vec<f64>], b_polys: &[Vec<f64>], x: f64) -> f64 {
    let deg_a = a_polys.len() - 1;
    let deg_b = b_polys.len() - 1;
    let size = deg_a + deg_b;
    let a_desc: Vec<f64> = a_polys.iter().rev().map(|p| eval_coeff(p, x)).collect();
    let b_desc: Vec<f64> = b_polys.iter().rev().map(|p| eval_coeff(p, x)).collect();
    let mut m = vec![Dd::ZERO; size * size];
    for row in 0..deg_b {
        for (col, &v) in a_desc.iter().enumerate() {
            m[row * size + row + col] = Dd::from(v);
        }
    }
    for row in 0..deg_a {
        for (col, &v) in b_desc.iter().enumerate() {
            m[(deg_b + row) * size + row + col] = Dd::from(v);
        }
    }
    dd_determinant(&mut m, size)
}

/// Double-double value: an unevaluated sum `hi + lo` carrying ~31 digits.
#[derive(Debug, Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    fn from(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    fn value(self) -> f64 {
        self.hi + self.lo
    }

    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    fn add(self, other: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, other.hi);
        quick_two_sum(s, e + self.lo + other.lo)
    }

    fn sub(self, other: Dd) -> Dd {
        self.add(other.neg())
    }

    fn mul(self, other: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, other.hi);
        quick_two_sum(p, e + self.hi * other.lo + self.lo * other.hi)
    }

    fn div(self, other: Dd) -> Dd {
        let q1 = self.hi / other.hi;
        let r = self.sub(other.mul(Dd::from(q1)));
        let q2 = (r.hi + r.lo) / other.hi;
        quick_two_sum(q1, q2)
    }
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    Dd { hi: s, lo: b - (s - a) }
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// LU elimination with partial pivoting over double-double entries; returns
/// the determinant rounded back to f64.
fn dd_determinant(m: &mut [Dd], n: usize) -> f64 {
    let mut det = Dd::from(1.0);
    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_mag = m[col * n + col].hi.abs();
        for row in col + 1..n {
            let mag = m[row * n + col].hi.abs();
            if mag > pivot_mag {
                pivot_mag = mag;
                pivot_row = row;
            }
        }
        if pivot_mag == 0.0 {
            return 0.0;
        }
        if pivot_row != col {
            for k in 0..n {
                m.swap(col * n + k, pivot_row * n + k);
            }
            det = det.neg();
        }
        let pivot = m[col * n + col];
        det = det.mul(pivot);
        for row in col + 1..n {
            let factor = m[row * n + col].div(pivot);
            for k in col + 1..n {
                let update = factor.mul(m[col * n + k]);
                m[row * n + k] = m[row * n + k].sub(update);
            }
        }
    }
    det.value()
}

/// All real roots of `p`, sorted ascending and deduplicated.
///
/// Roots are the eigenvalues of the balanced companion matrix of the monic
/// normalization, kept when their imaginary part is negligible and polished
/// with a few Newton steps.
pub fn real_roots(p: &Poly1D) -> Result<Vec<f64>, PolysolveError> {
    let scale = p.coeff_scale();
    if scale == 0.0 || p.coeffs.is_empty() {
        return Err(PolysolveError::ZeroPolynomial);
    }
    let degree = p.degree();
    if degree == 0 {
        return Ok(Vec::new());
    }

    let lead = p.coeffs[degree];
    let monic: Vec<f64> = p.coeffs[..degree].iter().map(|c| c / lead).collect();

    let mut companion = DMatrix::zeros(degree, degree);
    for i in 1..degree {
        companion[(i, i - 1)] = 1.0;
    }
    for (i, &c) in monic.iter().enumerate() {
        companion[(i, degree - 1)] = -c;
    }
    balance_in_place(&mut companion);

    let eigenvalues = companion.complex_eigenvalues();
    let mut roots = Vec::new();
    for ev in eigenvalues.iter() {
        if ev.im.abs() > IMAGINARY_ROOT_TOL * (1.0 + ev.re.abs()) {
            continue;
        }
        roots.push(newton_polish(p, ev.re));
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup_by(|b, a| (*b - *a).abs() <= ROOT_DEDUP_SPACING * (1.0 + a.abs()));
    Ok(roots)
}

/// Parlett-Reinsch balancing: diagonal power-of-two similarity scaling until
/// row and column norms roughly agree.
fn balance_in_place(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    let radix = 2.0f64;
    for _ in 0..32 {
        let mut converged = true;
        for i in 0..n {
            let mut row = 0.0;
            let mut col = 0.0;
            for j in 0..n {
                if j != i {
                    row += m[(i, j)].abs();
                    col += m[(j, i)].abs();
                }
            }
            if row == 0.0 || col == 0.0 {
                continue;
            }
            let mut factor = 1.0;
            let target = row / radix;
            let mut c = col;
            while c < target {
                factor *= radix;
                c *= radix * radix;
            }
            let target = row * radix;
            while c > target {
                factor /= radix;
                c /= radix * radix;
            }
            if (col + row) / factor < 0.95 * (col + row) && factor != 1.0 {
                converged = false;
                for j in 0..n {
                    m[(i, j)] /= factor;
                    m[(j, i)] *= factor;
                }
            }
        }
        if converged {
            break;
        }
    }
}

fn newton_polish(p: &Poly1D, mut x: f64) -> f64 {
    let (mut best_val, _) = p.eval_with_derivative(x);
    let mut best = x;
    for _ in 0..4 {
        let (value, derivative) = p.eval_with_derivative(x);
        if derivative == 0.0 || !value.is_finite() {
            break;
        }
        x -= value / derivative;
        let (new_val, _) = p.eval_with_derivative(x);
        if new_val.abs() < best_val.abs() {
            best_val = new_val;
            best = x;
        }
    }
    best
}

/// Candidate camera positions: the Cartesian product (x-major) of the real
/// roots of the two resultants. At most 25 pairs since each resultant has
/// degree at most 5.
///
/// Each root is polished against the Sylvester determinant itself, which is
/// cheap to evaluate and free of the global fit's residual error.
pub fn candidate_positions(sys: &CubicSystem) -> Result<Vec<(f64, f64)>, PolysolveError> {
    let res_x = sylvester_resultant(sys, EliminationAxis::Y)?;
    let res_y = sylvester_resultant(sys, EliminationAxis::X)?;
    let mut xs = real_roots(&res_x)?;
    let mut ys = real_roots(&res_y)?;
    if xs.is_empty() || ys.is_empty() {
        return Err(PolysolveError::NoCandidates);
    }
    polish_roots_against_determinant(sys, EliminationAxis::Y, &mut xs);
    polish_roots_against_determinant(sys, EliminationAxis::X, &mut ys);
    Ok(cartesian_pairs(&xs, &ys))
}

fn polish_roots_against_determinant(sys: &CubicSystem, axis: EliminationAxis, roots: &mut [f64]) {
    let scale = sys.coeff_scale();
    let a_polys = trim_coefficient_polys(sys.a_in(axis), scale);
    let b_polys = trim_coefficient_polys(sys.b_in(axis), scale);
    if a_polys.is_empty() || b_polys.is_empty() {
        return;
    }
    let eval = |x: f64| sylvester_determinant(&a_polys, &b_polys, x);
    for root in roots.iter_mut() {
        *root = secant_polish(&eval, *root);
    }
}

/// A few secant steps, confined to a small neighborhood of the start so a
/// polish can tighten a root but never jump to a different one.
fn secant_polish(eval: &dyn Fn(f64) -> f64, start: f64) -> f64 {
    let limit = 1e-3 * (1.0 + start.abs());
    let mut x_prev = start;
    let mut f_prev = eval(x_prev);
    let mut x = start + 1e-7 * (1.0 + start.abs());
    let mut f = eval(x);
    let mut best = if f_prev.abs() <= f.abs() { x_prev } else { x };
    let mut best_f = f_prev.abs().min(f.abs());
    for _ in 0..12 {
        if f == f_prev || !f.is_finite() {
            break;
        }
        let next = x - f * (x - x_prev) / (f - f_prev);
        if !next.is_finite() || (next - start).abs() > limit {
            break;
        }
        x_prev = x;
        f_prev = f;
        x = next;
        f = eval(x);
        if f.abs() < best_f {
            best_f = f.abs();
            best = x;
        }
        if (x - x_prev).abs() <= 1e-15 * (1.0 + x.abs()) {
            break;
        }
    }
    best
}

/// x-major product order: all y values for the first x, then the next x.
fn cartesian_pairs(xs: &[f64], ys: &[f64]) -> Vec<(f64, f64)> {
    let mut pairs = Vec::with_capacity(xs.len() * ys.len());
    for &x in xs {
        for &y in ys {
            pairs.push((x, y));
        }
    }
    pairs
}
