//! Miura initial data `q = r' + r^2` with `r` vanishing on the positive
//! half-line.
//!
//! A profile is an ordered list of pieces covering `(-inf, 0]`. A piece is
//! either *exact*, meaning `q` is constant on it so `r` solves the Riccati
//! equation `r' + r^2 = v` (this covers constant `r`, `r = 1/(x - p)` and
//! `tanh` shapes), or *smooth*, meaning `r` is given by a function and
//! handled by quadrature. Jumps of `r` between pieces are allowed and
//! contribute point masses to `q`.

use crate::error::{Error, Result};
use crate::quad;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::{Arc, OnceLock};

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

const QUAD_TOL: f64 = 1e-13;

/// How `r` is described on one piece.
#[derive(Clone)]
pub enum PieceKind {
    /// `r' + r^2 = potential` on the piece, with `r(right-) = r_right`.
    Riccati { potential: f64, r_right: f64 },
    /// Smooth `r` given pointwise, with an optional derivative.
    Smooth { r: RealFn, dr: Option<RealFn> },
}

impl fmt::Debug for PieceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PieceKind::Riccati { potential, r_right } => f
                .debug_struct("Riccati")
                .field("potential", potential)
                .field("r_right", r_right)
                .finish(),
            PieceKind::Smooth { dr, .. } => f
                .debug_struct("Smooth")
                .field("has_derivative", &dr.is_some())
                .finish(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Piece {
    pub left: f64,
    pub right: f64,
    pub kind: PieceKind,
}

impl Piece {
    pub fn constant(left: f64, right: f64, value: f64) -> Self {
        Piece {
            left,
            right,
            kind: PieceKind::Riccati {
                potential: value * value,
                r_right: value,
            },
        }
    }

    pub fn riccati(left: f64, right: f64, potential: f64, r_right: f64) -> Self {
        Piece {
            left,
            right,
            kind: PieceKind::Riccati { potential, r_right },
        }
    }

    pub fn smooth(left: f64, right: f64, r: RealFn, dr: Option<RealFn>) -> Self {
        Piece {
            left,
            right,
            kind: PieceKind::Smooth { r, dr },
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.kind, PieceKind::Riccati { .. })
    }

    /// Constant value of `q` on the piece interior, if it has one.
    pub fn potential(&self) -> Option<f64> {
        match self.kind {
            PieceKind::Riccati { potential, .. } => Some(potential),
            PieceKind::Smooth { .. } => None,
        }
    }

    pub fn r(&self, x: f64) -> f64 {
        match &self.kind {
            PieceKind::Riccati { potential, r_right } => {
                let (y, dy) = riccati_linearization(*potential, *r_right, x - self.right);
                dy / y
            }
            PieceKind::Smooth { r, .. } => r(x),
        }
    }

    pub fn dr(&self, x: f64) -> Option<f64> {
        match &self.kind {
            PieceKind::Riccati { potential, .. } => {
                let r = self.r(x);
                Some(potential - r * r)
            }
            PieceKind::Smooth { dr, .. } => dr.as_ref().map(|d| d(x)),
        }
    }
}

/// `r = y'/y` with `y'' = v y`, `y(0) = 1`, `y'(0) = r_b`, evaluated at
/// offset `d` from the right end. Returns `(y, y')`.
fn riccati_linearization(v: f64, r_b: f64, d: f64) -> (f64, f64) {
    let (c, s) = if v > 0.0 {
        let w = v.sqrt();
        ((w * d).cosh(), (w * d).sinh() / w)
    } else if v < 0.0 {
        let w = (-v).sqrt();
        ((w * d).cos(), (w * d).sin() / w)
    } else {
        (1.0, d)
    };
    (c + r_b * s, v * s + r_b * c)
}

/// Analytic `m` and `R` attached to catalog profiles where they are known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosedForm {
    Zero,
    /// `q = c delta`.
    Delta { c: f64 },
    /// `r = kappa` on the negative half-line.
    ConstantR { kappa: f64 },
    /// `q = height` on `[-width, 0]`.
    Box { height: f64, width: f64 },
}

impl ClosedForm {
    /// `m(k^2)` for `k` in the upper half-plane.
    pub fn m_of_k(&self, k: Complex64) -> Complex64 {
        let i = Complex64::i();
        match *self {
            ClosedForm::Zero => i * k,
            ClosedForm::Delta { c } => i * k - c,
            ClosedForm::ConstantR { kappa } => {
                let s = upper_sqrt(k * k - kappa * kappa);
                i * s + kappa
            }
            ClosedForm::Box { height, width } => {
                // psi = exp(-ikx) left of the box, standard variables inside.
                let w2 = k * k - height;
                let (c, s) = cos_sinc(w2, width);
                let num = w2 * s + i * k * c;
                let den = c - i * k * s;
                num / den
            }
        }
    }

    pub fn reflection(&self, k: Complex64) -> Complex64 {
        let i = Complex64::i();
        match *self {
            ClosedForm::Zero => Complex64::new(0.0, 0.0),
            ClosedForm::Delta { c } => c / (2.0 * i * k - c),
            _ => {
                let m = self.m_of_k(k);
                (i * k - m) / (i * k + m)
            }
        }
    }
}

/// `(cos(w l), sin(w l)/w)` as even functions of `w`, given `w^2`.
pub(crate) fn cos_sinc(w2: Complex64, len: f64) -> (Complex64, Complex64) {
    let w = w2.sqrt();
    let arg = w * len;
    let c = arg.cos();
    let s = if arg.norm() < 1e-4 {
        let a2 = arg * arg;
        len * (1.0 - a2 / 6.0 + a2 * a2 / 120.0)
    } else {
        arg.sin() / w
    };
    (c, s)
}

/// Square root with non-negative imaginary part.
pub(crate) fn upper_sqrt(z: Complex64) -> Complex64 {
    let s = z.sqrt();
    if s.im < 0.0 {
        -s
    } else {
        s
    }
}

/// Serializable description of a profile, as used in run configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub kind: String,
    #[serde(default)]
    pub params: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Replace the profile by its `n`-th mollification.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mollify: Option<u32>,
}

impl ProfileSpec {
    pub fn new(kind: &str, params: &[f64]) -> Self {
        ProfileSpec {
            kind: kind.to_string(),
            params: params.to_vec(),
            seed: None,
            mollify: None,
        }
    }

    pub fn build(&self) -> Result<MiuraProfile> {
        let base = if self.kind == "rough_random" {
            let seed = self.seed.ok_or_else(|| Error::InvalidParameter {
                profile: self.kind.clone(),
                reason: "missing `seed`".into(),
            })?;
            let mut params = vec![seed as f64];
            params.extend_from_slice(&self.params);
            catalog(&self.kind, &params)?
        } else {
            catalog(&self.kind, &self.params)?
        };
        match self.mollify {
            Some(n) => mollify(&base, n),
            None => Ok(base),
        }
    }
}

/// Admissible initial datum in Miura form.
#[derive(Clone)]
pub struct MiuraProfile {
    id: String,
    pieces: Vec<Piece>,
    closed_form: Option<ClosedForm>,
    smooth_data: bool,
    q_cache: Arc<OnceLock<NormalizedQ>>,
}

impl fmt::Debug for MiuraProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MiuraProfile")
            .field("id", &self.id)
            .field("pieces", &self.pieces)
            .field("closed_form", &self.closed_form)
            .finish()
    }
}

impl MiuraProfile {
    /// Builds a profile from pieces ordered left to right, contiguous and
    /// ending at 0. The first piece may start at `-inf`; otherwise `r` is
    /// extended by zero to the left.
    pub fn from_pieces(id: impl Into<String>, pieces: Vec<Piece>) -> Result<Self> {
        let id = id.into();
        let bad = |reason: String| Error::InvalidParameter {
            profile: id.clone(),
            reason,
        };
        if pieces.is_empty() {
            return Err(bad("no pieces".into()));
        }
        let mut pieces = pieces;
        if pieces[0].left.is_finite() {
            let left = pieces[0].left;
            pieces.insert(0, Piece::constant(f64::NEG_INFINITY, left, 0.0));
        }
        for w in pieces.windows(2) {
            if w[0].right != w[1].left {
                return Err(bad(format!("pieces not contiguous at {}", w[0].right)));
            }
        }
        if pieces.last().map(|p| p.right) != Some(0.0) {
            return Err(bad("last piece must end at x = 0".into()));
        }
        for p in &pieces {
            if p.left >= p.right {
                return Err(bad(format!("empty piece [{}, {}]", p.left, p.right)));
            }
            if !p.left.is_finite() && !p.is_exact() {
                // allowed: disk mode handles it
                continue;
            }
            validate_piece(p).map_err(bad)?;
        }
        Ok(MiuraProfile {
            id,
            pieces,
            closed_form: None,
            smooth_data: false,
            q_cache: Arc::new(OnceLock::new()),
        })
    }

    fn with_closed_form(mut self, cf: ClosedForm) -> Self {
        self.closed_form = Some(cf);
        self
    }

    fn with_smooth_data(mut self) -> Self {
        self.smooth_data = true;
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn closed_form(&self) -> Option<ClosedForm> {
        self.closed_form
    }

    /// True when `q = r' + r^2` is a smooth compactly supported function
    /// (no point masses), so a classical solver applies.
    pub fn has_smooth_q(&self) -> bool {
        self.smooth_data
    }

    /// Left edge of the region where `q` is not constant; `-inf` if the
    /// leftmost piece is not exact.
    pub fn support_left(&self) -> f64 {
        if self.pieces[0].is_exact() {
            self.pieces[0].right
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Constant value of `r` on `(-inf, support_left]`, when `r` is constant
    /// there.
    pub fn tail_constant(&self) -> Option<f64> {
        match self.pieces[0].kind {
            PieceKind::Riccati { potential, r_right } if potential == r_right * r_right => {
                Some(r_right)
            }
            _ => None,
        }
    }

    /// Constant value of `q` on the leftmost piece, when there is one.
    pub fn tail_potential(&self) -> Option<f64> {
        self.pieces[0].potential()
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.iter().all(|p| match p.kind {
            PieceKind::Riccati { potential, r_right } => potential == 0.0 && r_right == 0.0,
            PieceKind::Smooth { .. } => false,
        })
    }

    pub(crate) fn piece_index(&self, x: f64) -> Option<usize> {
        if x > 0.0 {
            return None;
        }
        // the right-closed convention: x belongs to the piece with left < x <= right
        self.pieces
            .iter()
            .position(|p| x > p.left && x <= p.right)
            .or(Some(0))
    }

    /// `r(x)`; `r = 0` for `x > 0`.
    pub fn r(&self, x: f64) -> f64 {
        match self.piece_index(x) {
            None => 0.0,
            Some(i) => self.pieces[i].r(x),
        }
    }

    /// Regular part of `q = r' + r^2` at `x` (point masses at piece
    /// boundaries are not included).
    pub fn q_regular(&self, x: f64) -> Option<f64> {
        match self.piece_index(x) {
            None => Some(0.0),
            Some(i) => {
                let p = &self.pieces[i];
                let r = p.r(x);
                p.dr(x).map(|d| d + r * r)
            }
        }
    }

    pub fn normalized_q(&self) -> Result<&NormalizedQ> {
        if let Some(q) = self.q_cache.get() {
            return Ok(q);
        }
        let built = NormalizedQ::build(&self.pieces)?;
        Ok(self.q_cache.get_or_init(|| built))
    }
}

fn validate_piece(p: &Piece) -> std::result::Result<(), String> {
    if let PieceKind::Riccati { potential, r_right } = p.kind {
        if !potential.is_finite() || !r_right.is_finite() {
            return Err("non-finite piece parameters".into());
        }
        if !p.left.is_finite() {
            let ok = if potential > 0.0 {
                r_right <= potential.sqrt() * (1.0 + 1e-14)
            } else if potential == 0.0 {
                r_right <= 0.0
            } else {
                false
            };
            if !ok {
                return Err(format!(
                    "r has a pole on the unbounded piece (v = {potential}, r_right = {r_right})"
                ));
            }
        } else {
            let len = p.right - p.left;
            let samples = 256;
            for j in 0..=samples {
                let d = -len * j as f64 / samples as f64;
                let (y, _) = riccati_linearization(potential, r_right, d);
                if y <= 0.0 {
                    return Err(format!("r has a pole inside [{}, {}]", p.left, p.right));
                }
            }
        }
    }
    Ok(())
}

/// The antiderivative `Q(x) = r(x) - int_x^0 r(s)^2 ds` for `x < 0`,
/// `Q = 0` on the positive half-line.
#[derive(Debug, Clone)]
pub struct NormalizedQ {
    pieces: Vec<Piece>,
    /// `int_{right_i}^0 r^2` for each piece.
    cumulative: Vec<f64>,
    /// `Q(right_i -)` for each piece.
    q_right: Vec<f64>,
}

impl NormalizedQ {
    fn build(pieces: &[Piece]) -> Result<Self> {
        let n = pieces.len();
        let mut cumulative = vec![0.0; n];
        let mut q_right = vec![0.0; n];
        let mut acc = 0.0;
        for i in (0..n).rev() {
            cumulative[i] = acc;
            let p = &pieces[i];
            q_right[i] = p.r(p.right) - acc;
            if i > 0 {
                acc += r_squared_integral(p, p.left, p.right)?;
            }
        }
        Ok(NormalizedQ {
            pieces: pieces.to_vec(),
            cumulative,
            q_right,
        })
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if x > 0.0 || (x == 0.0 && self.pieces.is_empty()) {
            return Ok(0.0);
        }
        if x == 0.0 {
            return Ok(0.0);
        }
        let i = self
            .pieces
            .iter()
            .position(|p| x > p.left && x <= p.right)
            .unwrap_or(0);
        self.eval_in(i, x)
    }

    /// `Q` at `x` using the representation of piece `i` (one-sided values at
    /// piece boundaries).
    pub(crate) fn eval_in(&self, i: usize, x: f64) -> Result<f64> {
        let p = &self.pieces[i];
        match &p.kind {
            PieceKind::Riccati { potential, .. } => Ok(self.q_right[i] - potential * (p.right - x)),
            PieceKind::Smooth { .. } => {
                Ok(p.r(x) - self.cumulative[i] - r_squared_integral(p, x, p.right)?)
            }
        }
    }

    /// `Q(right -)` for piece `i`.
    pub(crate) fn right_value(&self, i: usize) -> f64 {
        self.q_right[i]
    }

    /// `int_{right_i}^0 r^2`.
    pub(crate) fn cumulative(&self, i: usize) -> f64 {
        self.cumulative[i]
    }

    /// Limit of `Q` at `-inf`, or `None` when it does not exist.
    pub fn tail_value(&self) -> Option<f64> {
        match self.pieces[0].kind {
            PieceKind::Riccati { potential: 0.0, .. } => Some(self.q_right[0]),
            _ => None,
        }
    }
}

/// `int_a^b r^2` over part of one piece.
pub(crate) fn r_squared_integral(p: &Piece, a: f64, b: f64) -> Result<f64> {
    if a >= b {
        return Ok(0.0);
    }
    match &p.kind {
        PieceKind::Riccati { potential, .. } => {
            // r' = v - r^2  =>  int r^2 = v (b - a) - (r(b) - r(a))
            Ok(potential * (b - a) - (p.r(b) - p.r(a)))
        }
        PieceKind::Smooth { r, .. } => {
            let f = |s: f64| {
                let v = r(s);
                v * v
            };
            quad::integrate(&f, a, b, QUAD_TOL * (b - a).max(1.0))
        }
    }
}

/// `Q(x)` for the profile.
pub fn evaluate_q(profile: &MiuraProfile, x: f64) -> Result<f64> {
    profile.normalized_q()?.eval(x)
}

fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

fn bump_derivative(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        let b = bump(s);
        if b == 0.0 {
            return 0.0;
        }
        let d = 1.0 - s * s;
        b * (-2.0 * s / (d * d))
    }
}

/// Builds one of the named test profiles.
///
/// | name | params |
/// |---|---|
/// | `zero` | none |
/// | `delta` | `c > 0`: `q = c delta(x)` |
/// | `smooth_bump` | `a, amplitude`: `r = amplitude * bump(x + a)`, bump supported on `[-1, 1]` |
/// | `positive_box` | `b, a`: `q = b` on `[-a, 0]`, `b, a > 0` |
/// | `constant_r` | `kappa`: `r = kappa` on the negative half-line |
/// | `rough_random` | `seed, L, amplitude`: i.i.d. uniform `r` on unit cells of `[-L, 0]` |
pub fn catalog(name: &str, params: &[f64]) -> Result<MiuraProfile> {
    let bad = |reason: &str| Error::InvalidParameter {
        profile: name.to_string(),
        reason: reason.to_string(),
    };
    let want = |n: usize| -> Result<()> {
        if params.len() != n {
            Err(bad(&format!("expected {n} parameters, got {}", params.len())))
        } else if params.iter().any(|p| !p.is_finite()) {
            Err(bad("parameters must be finite"))
        } else {
            Ok(())
        }
    };
    let ninf = f64::NEG_INFINITY;
    match name {
        "zero" => {
            want(0)?;
            Ok(MiuraProfile::from_pieces("zero", vec![Piece::constant(ninf, 0.0, 0.0)])?
                .with_closed_form(ClosedForm::Zero)
                .with_smooth_data())
        }
        "delta" => {
            want(1)?;
            let c = params[0];
            if c <= 0.0 {
                return Err(bad("c must be positive"));
            }
            // r = -c/(1 - c x) = 1/(x - 1/c), q = 0 on x < 0, jump c at 0
            let id = format!("delta(c={c})");
            Ok(MiuraProfile::from_pieces(id, vec![Piece::riccati(ninf, 0.0, 0.0, -c)])?
                .with_closed_form(ClosedForm::Delta { c }))
        }
        "smooth_bump" => {
            want(2)?;
            let (a, amp) = (params[0], params[1]);
            if amp == 0.0 {
                return Ok(MiuraProfile::from_pieces(
                    format!("smooth_bump(a={a},amplitude=0)"),
                    vec![Piece::constant(ninf, 0.0, 0.0)],
                )?
                .with_closed_form(ClosedForm::Zero)
                .with_smooth_data());
            }
            if a < 1.0 {
                return Err(bad("bump must sit in x < 0: need a >= 1"));
            }
            let r: RealFn = Arc::new(move |x| amp * bump(x + a));
            let dr: RealFn = Arc::new(move |x| amp * bump_derivative(x + a));
            let mut pieces = vec![
                Piece::constant(ninf, -a - 1.0, 0.0),
                Piece::smooth(-a - 1.0, -a + 1.0, r, Some(dr)),
            ];
            if -a + 1.0 < 0.0 {
                pieces.push(Piece::constant(-a + 1.0, 0.0, 0.0));
            }
            Ok(
                MiuraProfile::from_pieces(format!("smooth_bump(a={a},amplitude={amp})"), pieces)?
                    .with_smooth_data(),
            )
        }
        "positive_box" => {
            want(2)?;
            let (b, a) = (params[0], params[1]);
            if b <= 0.0 || a <= 0.0 {
                return Err(bad("height b and width a must be positive"));
            }
            // r = sqrt(b) tanh(sqrt(b) x) on [-a, 0], r' = -r^2 to the left
            let sb = b.sqrt();
            let r_edge = -sb * (sb * a).tanh();
            let pieces = vec![
                Piece::riccati(ninf, -a, 0.0, r_edge),
                Piece::riccati(-a, 0.0, b, 0.0),
            ];
            Ok(
                MiuraProfile::from_pieces(format!("positive_box(b={b},a={a})"), pieces)?
                    .with_closed_form(ClosedForm::Box {
                        height: b,
                        width: a,
                    }),
            )
        }
        "constant_r" => {
            want(1)?;
            let kappa = params[0];
            Ok(MiuraProfile::from_pieces(
                format!("constant_r(kappa={kappa})"),
                vec![Piece::constant(ninf, 0.0, kappa)],
            )?
            .with_closed_form(ClosedForm::ConstantR { kappa }))
        }
        "rough_random" => {
            want(3)?;
            let (seed, len, amp) = (params[0], params[1], params[2]);
            if seed < 0.0 || seed.fract() != 0.0 {
                return Err(bad("seed must be a non-negative integer"));
            }
            if len < 1.0 || len.fract() != 0.0 || len > 1e6 {
                return Err(bad("L must be a positive integer"));
            }
            if amp < 0.0 {
                return Err(bad("amplitude must be non-negative"));
            }
            let cells = len as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
            let values: Vec<f64> = (0..cells)
                .map(|_| if amp > 0.0 { rng.random_range(-amp..amp) } else { 0.0 })
                .collect();
            let mut pieces = vec![Piece::constant(ninf, -len, 0.0)];
            // values[0] is the cell touching x = 0
            for j in (0..cells).rev() {
                let left = -(j as f64) - 1.0;
                pieces.push(Piece::constant(left, left + 1.0, values[j]));
            }
            MiuraProfile::from_pieces(
                format!("rough_random(seed={},L={len},amplitude={amp})", seed as u64),
                pieces,
            )
        }
        other => Err(Error::UnknownProfile(other.to_string())),
    }
}

/// Normalized one-sided mollifier supported on `[0, 1]`.
fn mollifier() -> &'static (f64, f64) {
    // (normalization, unused)
    static NORM: OnceLock<(f64, f64)> = OnceLock::new();
    NORM.get_or_init(|| {
        let f = |v: f64| bump(2.0 * v - 1.0);
        let total = quad::integrate(&f, 0.0, 1.0, 1e-15).expect("mollifier normalization");
        (total, 0.0)
    })
}

fn eta(v: f64) -> f64 {
    bump(2.0 * v - 1.0) / mollifier().0
}

fn eta_prime(v: f64) -> f64 {
    2.0 * bump_derivative(2.0 * v - 1.0) / mollifier().0
}

/// Smooth compactly supported approximation `r_n` of `r`.
///
/// `r` is truncated to `[-n, 0]` and convolved with a bump of width `1/n`
/// that only looks to the right, so `r_n` still vanishes on `x > 0`.
pub fn mollify(profile: &MiuraProfile, n: u32) -> Result<MiuraProfile> {
    if n == 0 {
        return Err(Error::InvalidArgument("mollification index must be >= 1".into()));
    }
    let id = format!("{}~mollify({n})", profile.id());
    if profile.is_zero() {
        return Ok(MiuraProfile::from_pieces(id, vec![Piece::constant(f64::NEG_INFINITY, 0.0, 0.0)])?
            .with_closed_form(ClosedForm::Zero)
            .with_smooth_data());
    }
    let eps = 1.0 / n as f64;
    let cut = -(n as f64);

    // breakpoints of the truncated r inside [cut, 0]
    let mut breaks = vec![cut, 0.0];
    for p in profile.pieces() {
        for e in [p.left, p.right] {
            if e > cut && e < 0.0 {
                breaks.push(e);
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let source = Arc::new(profile.clone());
    let src_breaks = Arc::new(breaks.clone());
    let conv = move |x: f64, kernel: fn(f64) -> f64| -> f64 {
        // int_0^eps r~(x + u) kernel(u/eps)/eps du, split at breakpoints
        let lo = x.max(cut);
        let hi = (x + eps).min(0.0);
        if lo >= hi {
            return 0.0;
        }
        let mut knots = vec![lo];
        knots.extend(src_breaks.iter().copied().filter(|&b| b > lo && b < hi));
        knots.push(hi);
        let mut total = 0.0;
        for w in knots.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let idx = source.piece_index(mid).unwrap_or(0);
            let piece = &source.pieces()[idx];
            let f = |v: f64| piece.r(v) * kernel((v - x) / eps) / eps;
            total += quad::integrate(&f, w[0], w[1], 1e-13 / eps).unwrap_or(f64::NAN);
        }
        total
    };
    let conv = Arc::new(conv);
    let c1 = conv.clone();
    let r: RealFn = Arc::new(move |x| c1(x, eta));
    let c2 = conv.clone();
    let dr: RealFn = Arc::new(move |x| -c2(x, eta_prime) / eps);

    let mut knots: Vec<f64> = vec![cut - eps];
    for &b in &breaks {
        knots.push(b - eps);
        knots.push(b);
    }
    knots.retain(|&k| k >= cut - eps && k <= 0.0);
    knots.sort_by(f64::total_cmp);
    knots.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let mut pieces = vec![Piece::constant(f64::NEG_INFINITY, knots[0], 0.0)];
    for w in knots.windows(2) {
        pieces.push(Piece::smooth(w[0], w[1], r.clone(), Some(dr.clone())));
    }
    Ok(MiuraProfile::from_pieces(id, pieces)?.with_smooth_data())
}
