//! Standard normal PDF/CDF built on rational-polynomial erf/erfc
//! (Cody's SPECFUN approximations, accurate to double precision).

use crate::scalar::{half, lit, Real};

/// Standard normal probability density.
pub fn pdf<T: Real>(z: T) -> T {
    let inv_sqrt_2pi = lit::<T>(0.3989422804014326779);
    inv_sqrt_2pi * (-half::<T>() * z * z).exp()
}

/// Standard normal cumulative distribution, `Phi(z) = erfc(-z / sqrt(2)) / 2`.
pub fn cdf<T: Real>(z: T) -> T {
    half::<T>() * erfc(-z / lit::<T>(std::f64::consts::SQRT_2))
}

const ERF_A: [f64; 5] = [
    3.16112374387056560e0,
    1.13864154151050156e2,
    3.77485237685302021e2,
    3.20937758913846947e3,
    1.85777706184603153e-1,
];
const ERF_B: [f64; 4] = [
    2.36012909523441209e1,
    2.44024637934444173e2,
    1.28261652607737228e3,
    2.84423683343917062e3,
];
const ERF_C: [f64; 9] = [
    5.64188496988670089e-1,
    8.88314979438837594e0,
    6.61191906371416295e1,
    2.98635138197400131e2,
    8.81952221241769090e2,
    1.71204761263407058e3,
    2.05107837782607147e3,
    1.23033935479799725e3,
    2.15311535474403846e-8,
];
const ERF_D: [f64; 8] = [
    1.57449261107098347e1,
    1.17693950891312499e2,
    5.37181101862009858e2,
    1.62138957456669019e3,
    3.29079923573345963e3,
    4.36261909014324716e3,
    3.43936767414372164e3,
    1.23033935480374942e3,
];
const ERF_P: [f64; 6] = [
    3.05326634961232344e-1,
    3.60344899949804439e-1,
    1.25781726111229246e-1,
    1.60837851487422766e-2,
    6.58749161529837803e-4,
    1.63153871373020978e-2,
];
const ERF_Q: [f64; 5] = [
    2.56852019228982242e0,
    1.87295284992346047e0,
    5.27905102951428412e-1,
    6.05183413124413191e-2,
    2.33520497626869185e-3,
];
const INV_SQRT_PI: f64 = 5.6418958354775628695e-1;
const ERF_THRESHOLD: f64 = 0.46875;
const ERFC_UNDERFLOW: f64 = 26.6;

/// Error function.
pub fn erf<T: Real>(x: T) -> T {
    let y = x.abs();
    if y <= lit::<T>(ERF_THRESHOLD) {
        let z = y * y;
        let mut num = lit::<T>(ERF_A[4]) * z;
        let mut den = z;
        for i in 0..3 {
            num = (num + lit::<T>(ERF_A[i])) * z;
            den = (den + lit::<T>(ERF_B[i])) * z;
        }
        x * (num + lit::<T>(ERF_A[3])) / (den + lit::<T>(ERF_B[3]))
    } else if x > T::zero() {
        T::one() - erfc(x)
    } else {
        erfc(-x) - T::one()
    }
}

/// Complementary error function.
pub fn erfc<T: Real>(x: T) -> T {
    let y = x.abs();
    let result = if y <= lit::<T>(ERF_THRESHOLD) {
        return T::one() - erf(x);
    } else if y <= lit::<T>(4.0) {
        let mut num = lit::<T>(ERF_C[8]) * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + lit::<T>(ERF_C[i])) * y;
            den = (den + lit::<T>(ERF_D[i])) * y;
        }
        exp_neg_sq(y) * (num + lit::<T>(ERF_C[7])) / (den + lit::<T>(ERF_D[7]))
    } else if y < lit::<T>(ERFC_UNDERFLOW) {
        let z = T::one() / (y * y);
        let mut num = lit::<T>(ERF_P[5]) * z;
        let mut den = z;
        for i in 0..4 {
            num = (num + lit::<T>(ERF_P[i])) * z;
            den = (den + lit::<T>(ERF_Q[i])) * z;
        }
        let r = z * (num + lit::<T>(ERF_P[4])) / (den + lit::<T>(ERF_Q[4]));
        exp_neg_sq(y) * (lit::<T>(INV_SQRT_PI) - r) / y
    } else {
        T::zero()
    };
    if x < T::zero() {
        lit::<T>(2.0) - result
    } else {
        result
    }
}

/// `exp(-y^2)` split so the large quadratic is evaluated on a value exactly
/// representable in a few bits, which keeps erfc accurate in the tails.
fn exp_neg_sq<T: Real>(y: T) -> T {
    let sixteen = lit::<T>(16.0);
    let ysq = (y * sixteen).trunc() / sixteen;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp()
}
