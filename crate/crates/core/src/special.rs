//! Modified Bessel functions of order zero (polynomial approximations,
//! Abramowitz & Stegun 9.8.1-9.8.6, relative error below ~2e-7).

/// `exp(-x) * I0(x)` for `x >= 0`.
pub fn bessel_i0_scaled(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= 3.75 {
        let t = (x / 3.75).powi(2);
        let i0 = 1.0
            + t * (3.515_622_9
                + t * (3.089_942_4
                    + t * (1.206_749_2 + t * (0.265_973_2 + t * (0.036_076_8 + t * 0.004_581_3)))));
        i0 * (-ax).exp()
    } else {
        let t = 3.75 / ax;
        let p = 0.398_942_28
            + t * (0.013_285_92
                + t * (0.002_253_19
                    + t * (-0.001_575_65
                        + t * (0.009_162_81
                            + t * (-0.020_577_06
                                + t * (0.026_355_37 + t * (-0.016_476_33 + t * 0.003_923_77)))))));
        p / ax.sqrt()
    }
}

pub fn bessel_i0(x: f64) -> f64 {
    bessel_i0_scaled(x) * x.abs().exp()
}

/// `exp(x) * K0(x)` for `x > 0`.
pub fn bessel_k0_scaled(x: f64) -> f64 {
    assert!(x > 0.0, "K0 requires a positive argument");
    if x <= 2.0 {
        let t = x * x / 4.0;
        let k0 = -(x / 2.0).ln() * bessel_i0(x)
            + (-0.577_215_66
                + t * (0.422_784_20
                    + t * (0.230_697_56
                        + t * (0.034_885_90 + t * (0.002_626_98 + t * (0.000_107_50 + t * 0.000_007_4))))));
        k0 * x.exp()
    } else {
        let t = 2.0 / x;
        let p = 1.253_314_14
            + t * (-0.078_323_58
                + t * (0.021_895_68
                    + t * (-0.010_624_46 + t * (0.005_878_72 + t * (-0.002_515_40 + t * 0.000_532_08)))));
        p / x.sqrt()
    }
}

pub fn bessel_k0(x: f64) -> f64 {
    bessel_k0_scaled(x) * (-x).exp()
}
