//! One-dimensional BV profiles in closed form.
//!
//! A profile is a continuous part (piecewise quadratic pieces plus optional
//! angle terms coming from open walls) together with finitely many jump atoms
//! and finitely many affinely reparameterised copies of the Cantor function.
//! Values are increments from the left end, so profiles can be glued without
//! touching their atoms.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_DEPTH: u32 = 40;
/// Atoms lighter than this are dropped during canonicalisation.
pub const DUST: f64 = 1e-15;

fn decompose(x: f64) -> (u64, u32) {
    // x = m / 2^e with m < 2^e, x in (0, 1)
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mut m, mut e) = if exp == 0 { (frac, 1074i64) } else { (frac | (1u64 << 52), 1075 - exp) };
    while m & 1 == 0 && e > 0 {
        m >>= 1;
        e -= 1;
    }
    (m, e as u32)
}

/// Exact ternary digits of a double in [0, 1), at most `depth` of them.
/// The expansion stops early once it terminates.
pub fn ternary_digits(x: f64, depth: u32) -> Vec<u8> {
    let mut out = Vec::with_capacity(depth as usize);
    if x <= 0.0 {
        return out;
    }
    let (m, e) = decompose(x);
    if e <= 125 {
        let mask = (1u128 << e) - 1;
        let mut n = m as u128;
        while out.len() < depth as usize && n != 0 {
            n *= 3;
            out.push((n >> e) as u8);
            n &= mask;
        }
    } else {
        let one = BigUint::from(1u8) << e as usize;
        let mut n = BigUint::from(m);
        while out.len() < depth as usize && n != BigUint::ZERO {
            n *= 3u8;
            let d = &n >> e as usize;
            out.push(d.to_u32_digits().first().copied().unwrap_or(0) as u8);
            n %= &one;
        }
    }
    out
}

/// Largest power of three tried when reading a double as a finite ternary
/// fraction.
const SNAP_POWER: u32 = 20;

/// Ternary digits of `k / 3^j` if `x` is the correctly rounded double of such
/// a fraction. The trailing digit is nonzero.
fn snapped_digits(x: f64) -> Option<Vec<u8>> {
    let mut pow = 1u64;
    for j in 1..=SNAP_POWER {
        pow *= 3;
        let k = (x * pow as f64).round() as u64;
        if !k.is_multiple_of(3) && k < pow && k as f64 / pow as f64 == x {
            let mut digits = vec![0u8; j as usize];
            let mut r = k;
            for d in digits.iter_mut().rev() {
                *d = (r % 3) as u8;
                r /= 3;
            }
            return Some(digits);
        }
    }
    None
}

/// Digits used for evaluation, and whether they form a finite expansion.
fn digits_for(x: f64, depth: u32) -> (Vec<u8>, bool) {
    match snapped_digits(x) {
        Some(mut d) => {
            let finite = d.len() <= depth as usize;
            d.truncate(depth as usize);
            (d, finite)
        }
        None => (ternary_digits(x, depth), false),
    }
}

/// Cantor function with absolute error at most 2^-depth. Doubles that round
/// a finite ternary fraction `k / 3^j` (j up to 20) are read as that fraction.
pub fn cantor_eval(x: f64, depth: u32) -> Result<f64> {
    if depth == 0 {
        return Err(Error::Domain("depth must be positive".into()));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("cantor_eval argument {x} outside [0, 1]")));
    }
    Ok(cantor_digits(x, depth))
}

fn cantor_digits(x: f64, depth: u32) -> f64 {
    if x >= 1.0 {
        return 1.0;
    }
    let mut acc = 0.0;
    let mut w = 0.5;
    for d in digits_for(x, depth).0 {
        match d {
            1 => return acc + w,
            2 => acc += w,
            _ => {}
        }
        w *= 0.5;
    }
    acc
}

/// Cantor function at the default depth, clamping the argument.
pub fn cantor(x: f64) -> f64 {
    cantor_digits(x.clamp(0.0, 1.0), DEFAULT_DEPTH)
}

/// Whether `x` survives the first `depth` ternary digits without a 1, i.e. it
/// cannot be certified to lie outside the Cantor set at that depth. A finite
/// expansion ending in 1 is read as ending in 0222...
pub fn in_cantor_set(x: f64, depth: u32) -> bool {
    if !(0.0..=1.0).contains(&x) {
        return false;
    }
    if x == 1.0 {
        return true;
    }
    let (digits, finite) = digits_for(x, depth);
    let body = if finite { &digits[..digits.len().saturating_sub(1)] } else { &digits[..] };
    !body.contains(&1)
}

/// Integral of the Cantor function from 0 to x.
pub fn cantor_integral(x: f64) -> f64 {
    fn go(x: f64, depth: u32) -> f64 {
        if x <= 0.0 || depth == 0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 0.5;
        }
        if x <= 1.0 / 3.0 {
            go(3.0 * x, depth - 1) / 6.0
        } else if x <= 2.0 / 3.0 {
            1.0 / 12.0 + (x - 1.0 / 3.0) / 2.0
        } else {
            0.25 + (x - 2.0 / 3.0) / 2.0 + go(3.0 * x - 2.0, depth - 1) / 6.0
        }
    }
    go(x, DEFAULT_DEPTH)
}

/// Integral of (alpha + beta * s) against dC over [s0, s1] within [0, 1].
pub fn cantor_linear_integral(alpha: f64, beta: f64, s0: f64, s1: f64) -> f64 {
    let moment = |s: f64| s * cantor(s) - cantor_integral(s);
    alpha * (cantor(s1) - cantor(s0)) + beta * (moment(s1) - moment(s0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariationPart {
    Total,
    Ac,
    Jump,
    Cantor,
    Singular,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcPiece {
    pub start: f64,
    pub end: f64,
    /// Continuous part at `start`.
    pub value: f64,
    pub slope: f64,
    pub curvature: f64,
}

impl AcPiece {
    fn rel(&self, t: f64) -> f64 {
        let s = t - self.start;
        self.slope * s + self.curvature * s * s
    }

    fn deriv(&self, t: f64) -> f64 {
        self.slope + 2.0 * self.curvature * (t - self.start)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpAtom {
    pub t: f64,
    /// Right limit minus left limit.
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CantorAtom {
    pub s0: f64,
    pub s1: f64,
    pub w: f64,
    pub l0: f64,
    pub l1: f64,
}

impl CantorAtom {
    pub fn ell(&self, t: f64) -> f64 {
        if t <= self.s0 {
            return self.l0;
        }
        if t >= self.s1 {
            return self.l1;
        }
        let f = (t - self.s0) / (self.s1 - self.s0);
        (self.l0 + (self.l1 - self.l0) * f).clamp(0.0, 1.0)
    }

    fn increment(&self, t: f64) -> f64 {
        if t <= self.s0 {
            return 0.0;
        }
        self.w * (cantor(self.ell(t)) - cantor(self.l0))
    }

    pub fn variation(&self) -> f64 {
        self.w.abs() * (cantor(self.l1) - cantor(self.l0)).abs()
    }
}

/// Restriction of an open wall's double-layer term to a line. In the line's
/// frame the parameter is the first coordinate and the line is `off = 0`;
/// `p`, `q` are the wall segment endpoints in that frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleTerm {
    pub start: f64,
    pub end: f64,
    pub weight: f64,
    pub p: [f64; 2],
    pub q: [f64; 2],
    /// Crossing parameter and the branch jump of the raw angle there; the
    /// stored term is unwrapped so that it is continuous.
    pub cut: Option<[f64; 2]>,
}

impl AngleTerm {
    fn theta(&self, t: f64) -> f64 {
        let p = [self.p[0] - t, self.p[1]];
        let q = [self.q[0] - t, self.q[1]];
        if let Some([tc, delta]) = self.cut {
            if t == tc {
                return std::f64::consts::PI * (self.q[1] - self.p[1]).signum();
            }
            let raw = (p[0] * q[1] - p[1] * q[0]).atan2(p[0] * q[0] + p[1] * q[1]);
            return if t > tc { raw - delta } else { raw };
        }
        (p[0] * q[1] - p[1] * q[0]).atan2(p[0] * q[0] + p[1] * q[1])
    }

    fn dtheta(&self, t: f64) -> f64 {
        let p = [self.p[0] - t, self.p[1]];
        let q = [self.q[0] - t, self.q[1]];
        q[1] / (q[0] * q[0] + q[1] * q[1]) - p[1] / (p[0] * p[0] + p[1] * p[1])
    }

    fn increment(&self, t: f64) -> f64 {
        if t <= self.start {
            return 0.0;
        }
        let t = t.min(self.end);
        self.weight * (self.theta(t) - self.theta(self.start))
    }

    fn covers(&self, a: f64, b: f64) -> bool {
        self.start <= a && b <= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BVProfile {
    pub interval: [f64; 2],
    pub breakpoints: Vec<f64>,
    pub pieces: Vec<AcPiece>,
    pub jumps: Vec<JumpAtom>,
    pub cantor: Vec<CantorAtom>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub angles: Vec<AngleTerm>,
}

/// Incremental constructor for profiles; pieces are appended left to right.
#[derive(Debug, Clone)]
pub struct ProfileBuilder {
    a0: f64,
    value0: f64,
    ends: Vec<(f64, f64, f64)>,
    jumps: Vec<JumpAtom>,
    cantor: Vec<CantorAtom>,
    angles: Vec<AngleTerm>,
}

impl ProfileBuilder {
    pub fn new(a0: f64, value0: f64) -> Self {
        ProfileBuilder { a0, value0, ends: Vec::new(), jumps: Vec::new(), cantor: Vec::new(), angles: Vec::new() }
    }

    pub fn piece(mut self, end: f64, slope: f64, curvature: f64) -> Self {
        self.ends.push((end, slope, curvature));
        self
    }

    pub fn affine(self, end: f64, slope: f64) -> Self {
        self.piece(end, slope, 0.0)
    }

    pub fn constant(self, end: f64) -> Self {
        self.piece(end, 0.0, 0.0)
    }

    pub fn jump(mut self, t: f64, h: f64) -> Self {
        self.jumps.push(JumpAtom { t, h });
        self
    }

    pub fn cantor(mut self, s0: f64, s1: f64, w: f64, l0: f64, l1: f64) -> Self {
        self.cantor.push(CantorAtom { s0, s1, w, l0, l1 });
        self
    }

    pub fn angle(mut self, term: AngleTerm) -> Self {
        self.angles.push(term);
        self
    }

    pub fn build(self) -> Result<BVProfile> {
        if self.ends.is_empty() {
            return Err(Error::Contract("profile needs at least one piece".into()));
        }
        let mut pieces = Vec::with_capacity(self.ends.len());
        let mut start = self.a0;
        let mut value = self.value0;
        for &(end, slope, curvature) in &self.ends {
            if !(end > start) || !slope.is_finite() || !curvature.is_finite() {
                return Err(Error::Contract(format!("bad piece [{start}, {end}]")));
            }
            let p = AcPiece { start, end, value, slope, curvature };
            value += p.rel(end);
            pieces.push(p);
            start = end;
        }
        BVProfile::from_parts(pieces, self.jumps, self.cantor, self.angles)
    }
}

impl BVProfile {
    /// Assembles a profile from already-continuous pieces and canonicalises it.
    pub fn from_parts(
        pieces: Vec<AcPiece>,
        mut jumps: Vec<JumpAtom>,
        cantor: Vec<CantorAtom>,
        angles: Vec<AngleTerm>,
    ) -> Result<BVProfile> {
        let a0 = pieces[0].start;
        let am = pieces[pieces.len() - 1].end;
        for j in &jumps {
            if !(j.t > a0 && j.t < am) || !j.h.is_finite() {
                return Err(Error::Contract(format!("jump at {} not interior to [{a0}, {am}]", j.t)));
            }
        }
        jumps.sort_by(|a, b| a.t.total_cmp(&b.t));
        let mut merged: Vec<JumpAtom> = Vec::with_capacity(jumps.len());
        for j in jumps {
            match merged.last_mut() {
                Some(last) if last.t == j.t => last.h += j.h,
                _ => merged.push(j),
            }
        }
        merged.retain(|j| j.h.abs() >= DUST);
        let mut cantor: Vec<CantorAtom> = cantor.into_iter().filter(|c| c.w.abs() >= DUST).collect();
        for c in &cantor {
            let ok = c.s0 >= a0 && c.s1 <= am && c.s0 < c.s1 && (0.0..=1.0).contains(&c.l0) && (0.0..=1.0).contains(&c.l1);
            if !ok || !c.w.is_finite() {
                return Err(Error::Contract(format!("cantor atom on [{}, {}] is malformed", c.s0, c.s1)));
            }
        }
        cantor.sort_by(|a, b| a.s0.total_cmp(&b.s0).then(a.s1.total_cmp(&b.s1)));
        let mut bps: Vec<f64> = pieces.iter().map(|p| p.start).collect();
        bps.push(am);
        for a in &angles {
            if !bps.contains(&a.start) || !bps.contains(&a.end) || a.start >= a.end {
                return Err(Error::Contract("angle term support must be a union of pieces".into()));
            }
        }
        bps.extend(merged.iter().map(|j| j.t));
        bps.extend(cantor.iter().flat_map(|c| [c.s0, c.s1]));
        bps.sort_by(f64::total_cmp);
        bps.dedup();
        Ok(BVProfile { interval: [a0, am], breakpoints: bps, pieces, jumps: merged, cantor, angles })
    }

    pub fn constant(interval: [f64; 2], value: f64) -> Result<BVProfile> {
        ProfileBuilder::new(interval[0], value).constant(interval[1]).build()
    }

    pub fn start(&self) -> f64 {
        self.interval[0]
    }

    pub fn end(&self) -> f64 {
        self.interval[1]
    }

    fn piece_at(&self, t: f64) -> &AcPiece {
        let i = self.pieces.partition_point(|p| p.start <= t);
        &self.pieces[i.saturating_sub(1)]
    }

    fn continuous(&self, t: f64) -> f64 {
        let p = self.piece_at(t);
        let t = t.clamp(self.interval[0], self.interval[1]);
        let mut v = p.value + p.rel(t);
        for c in &self.cantor {
            v += c.increment(t);
        }
        for a in &self.angles {
            v += a.increment(t);
        }
        v
    }

    fn jumps_before(&self, t: f64, inclusive: bool) -> f64 {
        self.jumps.iter().filter(|j| j.t < t || (inclusive && j.t == t)).map(|j| j.h).sum()
    }

    pub fn left_limit(&self, t: f64) -> f64 {
        if t <= self.interval[0] {
            return self.right_limit(self.interval[0]);
        }
        self.continuous(t) + self.jumps_before(t, false)
    }

    pub fn right_limit(&self, t: f64) -> f64 {
        if t >= self.interval[1] {
            return self.left_limit(self.interval[1]);
        }
        self.continuous(t) + self.jumps_before(t, true)
    }

    /// Minimum of the one-sided limits; one-sided at the interval ends.
    pub fn lower_limit(&self, t: f64) -> f64 {
        self.left_limit(t).min(self.right_limit(t))
    }

    pub fn upper_limit(&self, t: f64) -> f64 {
        self.left_limit(t).max(self.right_limit(t))
    }

    fn piece_variation(&self, p: &AcPiece) -> f64 {
        let active: Vec<&AngleTerm> = self.angles.iter().filter(|a| a.covers(p.start, p.end)).collect();
        if active.is_empty() {
            let len = p.end - p.start;
            if p.curvature != 0.0 {
                let tau = -p.slope / (2.0 * p.curvature);
                if tau > 0.0 && tau < len {
                    let mid = p.rel(p.start + tau);
                    return mid.abs() + (p.rel(p.end) - mid).abs();
                }
            }
            return p.rel(p.end).abs();
        }
        let f = |t: f64| p.rel(t) + active.iter().map(|a| a.weight * (a.theta(t) - a.theta(p.start))).sum::<f64>();
        let g = |t: f64| p.deriv(t) + active.iter().map(|a| a.weight * a.dtheta(t)).sum::<f64>();
        let mut samples: Vec<f64> = (0..=64).map(|k| p.start + (p.end - p.start) * k as f64 / 64.0).collect();
        for a in &active {
            for x in [a.p[0], a.q[0]] {
                if x > p.start && x < p.end {
                    samples.push(x);
                }
            }
        }
        samples.sort_by(f64::total_cmp);
        samples.dedup();
        let mut crit = vec![p.start];
        for w in samples.windows(2) {
            let (mut lo, mut hi) = (w[0], w[1]);
            let (glo, ghi) = (g(lo), g(hi));
            if glo == 0.0 || glo.signum() == ghi.signum() {
                continue;
            }
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if g(mid).signum() == glo.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            crit.push(0.5 * (lo + hi));
        }
        crit.push(p.end);
        crit.windows(2).map(|w| (f(w[1]) - f(w[0])).abs()).sum()
    }

    pub fn variation(&self, part: VariationPart) -> f64 {
        let ac = || self.pieces.iter().map(|p| self.piece_variation(p)).sum::<f64>();
        let jump = || self.jumps.iter().map(|j| j.h.abs()).sum::<f64>();
        let cantor = || self.cantor.iter().map(CantorAtom::variation).sum::<f64>();
        match part {
            VariationPart::Ac => ac(),
            VariationPart::Jump => jump(),
            VariationPart::Cantor => cantor(),
            VariationPart::Singular => jump() + cantor(),
            VariationPart::Total => ac() + jump() + cantor(),
        }
    }

    pub fn singular_variation(&self) -> f64 {
        self.variation(VariationPart::Singular)
    }

    /// Infimum of the lower limit over the interval. Exact for profiles made
    /// of quadratic pieces and jumps; sampled where Cantor or angle terms act.
    pub fn infimum(&self) -> f64 {
        let mut m = f64::INFINITY;
        for &t in &self.breakpoints {
            m = m.min(self.lower_limit(t));
        }
        for p in &self.pieces {
            if p.curvature > 0.0 {
                let tau = -p.slope / (2.0 * p.curvature);
                if tau > 0.0 && p.start + tau < p.end {
                    m = m.min(self.lower_limit(p.start + tau));
                }
            }
            let busy = self.angles.iter().any(|a| a.covers(p.start, p.end))
                || self.cantor.iter().any(|c| c.s0 < p.end && c.s1 > p.start);
            if busy {
                for k in 1..64 {
                    m = m.min(self.lower_limit(p.start + (p.end - p.start) * k as f64 / 64.0));
                }
            }
        }
        m
    }

    /// Restriction to a sub-interval, keeping the level of the original.
    pub fn restrict_to(&self, c: f64, d: f64) -> Result<BVProfile> {
        if !(c >= self.interval[0] && d <= self.interval[1] && c < d) {
            return Err(Error::Contract(format!("[{c}, {d}] not inside {:?}", self.interval)));
        }
        let mut pieces = Vec::new();
        for p in &self.pieces {
            let (s, e) = (p.start.max(c), p.end.min(d));
            if s < e {
                pieces.push(AcPiece { start: s, end: e, value: p.value + p.rel(s), slope: p.deriv(s), curvature: p.curvature });
            }
        }
        // the clipped atoms start from zero at c, so the pieces carry the full level
        let shift = self.right_limit(c) - pieces[0].value;
        for p in &mut pieces {
            p.value += shift;
        }
        let jumps = self.jumps.iter().copied().filter(|j| j.t > c && j.t < d).collect();
        let cantor = self
            .cantor
            .iter()
            .filter_map(|a| {
                let (s0, s1) = (a.s0.max(c), a.s1.min(d));
                (s0 < s1).then(|| CantorAtom { s0, s1, w: a.w, l0: a.ell(s0), l1: a.ell(s1) })
            })
            .collect::<Vec<_>>();
        let angles = self
            .angles
            .iter()
            .filter_map(|a| {
                let (s, e) = (a.start.max(c), a.end.min(d));
                (s < e).then_some(AngleTerm { start: s, end: e, ..*a })
            })
            .collect();
        BVProfile::from_parts(pieces, jumps, cantor, angles)
    }

    /// Moves the whole profile up by `delta`.
    pub fn shifted(&self, delta: f64) -> BVProfile {
        let mut out = self.clone();
        for p in &mut out.pieces {
            p.value += delta;
        }
        out
    }
}

/// Whether |u(a_m) - u(a_0)| is bounded by the total variation, with the
/// one-sided limits as endpoint values.
pub fn endpoint_bound_check(p: &BVProfile) -> bool {
    let tv = p.variation(VariationPart::Total);
    let diff = (p.lower_limit(p.end()) - p.lower_limit(p.start())).abs();
    diff <= tv + 1e-12 * tv.max(1.0)
}

/// Glues `p2` after `p1`; the level of `p2` follows from `p1` and the junction.
pub fn concat(p1: &BVProfile, p2: &BVProfile, junction_jump: f64) -> Result<BVProfile> {
    if p1.end() != p2.start() {
        return Err(Error::Contract(format!(
            "cannot glue {:?} to {:?}: endpoints differ",
            p1.interval, p2.interval
        )));
    }
    let last = p1.pieces[p1.pieces.len() - 1];
    let mut level = last.value + last.rel(last.end);
    let mut pieces = p1.pieces.clone();
    for p in &p2.pieces {
        pieces.push(AcPiece { value: level, ..*p });
        level += p.rel(p.end);
    }
    let mut jumps = p1.jumps.clone();
    if junction_jump != 0.0 {
        jumps.push(JumpAtom { t: p1.end(), h: junction_jump });
    }
    jumps.extend_from_slice(&p2.jumps);
    let cantor = p1.cantor.iter().chain(&p2.cantor).copied().collect();
    let angles = p1.angles.iter().chain(&p2.angles).copied().collect();
    BVProfile::from_parts(pieces, jumps, cantor, angles)
}
