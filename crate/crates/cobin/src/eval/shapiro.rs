//! Shapiro-Wilk normality test (Royston's extension to n up to 5000).
//!
//! The statistic correlates the sample's order statistics with the expected
//! normal order scores `m_i = Phi^{-1}((i - 3/8)/(n + 1/4))`; the two
//! extreme weights get Royston's polynomial corrections, and `ln(1 - W)`
//! is referred to a fitted normal distribution for the p-value. The
//! approximation is tuned for `12 <= n <= 5000`; smaller samples are
//! refused rather than served from an unrelated small-sample branch.

use super::normal::{standard_normal_cdf, standard_normal_quantile};
use crate::{Error, Result};

/// Result of a Shapiro-Wilk test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapiroWilk {
    /// Test statistic in `(0, 1]`; 1 is perfectly normal order structure.
    pub w: f64,
    /// Upper-tail p-value of `ln(1 - W)` under normality.
    pub p_value: f64,
}

/// Test a sample for normality. Requires `12 <= n <= 5000` finite values
/// with positive variance.
pub fn shapiro_wilk(sample: &[f64]) -> Result<ShapiroWilk> {
    let n = sample.len();
    if !(12..=5000).contains(&n) {
        return Err(Error::invalid(format!(
            "Shapiro-Wilk approximation covers 12 <= n <= 5000, got n = {n}"
        )));
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(
            "Shapiro-Wilk: non-finite value in sample (boundary residuals are infinite)",
        ));
    }
    let mut x: Vec<f64> = sample.to_vec();
    x.sort_by(|a, b| a.partial_cmp(b).unwrap());

    // Expected normal order scores and their squared norm.
    let nf = n as f64;
    let m: Vec<f64> = (1..=n)
        .map(|i| standard_normal_quantile((i as f64 - 0.375) / (nf + 0.25)))
        .collect();
    let m_norm2: f64 = m.iter().map(|v| v * v).sum();

    // Royston's corrected end weights; interior weights stay proportional
    // to the scores.
    let u = 1.0 / nf.sqrt();
    let a_n = -2.706056 * u.powi(5) + 4.434685 * u.powi(4) - 2.071190 * u.powi(3)
        - 0.147981 * u.powi(2)
        + 0.221157 * u
        + m[n - 1] / m_norm2.sqrt();
    let a_n1 = -3.582633 * u.powi(5) + 5.682633 * u.powi(4) - 1.752461 * u.powi(3)
        - 0.293762 * u.powi(2)
        + 0.042981 * u
        + m[n - 2] / m_norm2.sqrt();
    let phi = (m_norm2 - 2.0 * m[n - 1] * m[n - 1] - 2.0 * m[n - 2] * m[n - 2])
        / (1.0 - 2.0 * a_n * a_n - 2.0 * a_n1 * a_n1);

    let mut a = vec![0.0; n];
    a[n - 1] = a_n;
    a[n - 2] = a_n1;
    a[0] = -a_n;
    a[1] = -a_n1;
    let scale = phi.sqrt();
    for i in 2..(n - 2) {
        a[i] = m[i] / scale;
    }

    let mean = x.iter().sum::<f64>() / nf;
    let ss: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    if ss <= 0.0 {
        return Err(Error::invalid("Shapiro-Wilk: sample has zero variance"));
    }
    let b: f64 = a.iter().zip(&x).map(|(ai, xi)| ai * xi).sum();
    let w = (b * b / ss).min(1.0);

    // ln(1 - W) is approximately normal with moments polynomial in ln n.
    let one_minus = 1.0 - w;
    let p_value = if one_minus <= f64::EPSILON {
        1.0
    } else {
        let y = nf.ln();
        let mu = 0.0038915 * y.powi(3) - 0.083751 * y.powi(2) - 0.31082 * y - 1.5861;
        let sigma = (0.0030302 * y * y - 0.082676 * y - 0.4803).exp();
        let z = (one_minus.ln() - mu) / sigma;
        standard_normal_cdf(-z)
    };
    Ok(ShapiroWilk { w, p_value })
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference (W, p) pairs computed with an independent implementation of
    // the same Royston approximation on these exact samples.
    const NORMAL_12: [f64; 12] = [
        -8.10607209018293084e-01,
        1.32070353617681890e+00,
        4.56277294009698187e-01,
        -4.65249938596976387e-01,
        6.05510561619435617e-01,
        3.70626230751865293e-01,
        1.20602376128185673e+00,
        -7.89589124368833967e-02,
        -9.59987898705420228e-01,
        5.91194196641962377e-01,
        5.50132694189866545e-01,
        -7.33299592627016938e-01,
    ];

    const NORMAL_25: [f64; 25] = [
        1.16114821470545371e+00,
        1.30287910868933210e+00,
        1.08535030475467109e+00,
        1.76984277711004090e+00,
        2.15926604602079264e+00,
        5.89439761066910428e-01,
        1.28964638253819297e+00,
        1.09792150153139412e+00,
        2.13261007539554770e+00,
        2.81889693698154531e+00,
        1.51360080238501116e+00,
        1.63052217899655272e+00,
        2.49512026431220013e+00,
        2.59426031101240850e+00,
        1.57088157894459557e+00,
        3.99912739804372031e-01,
        1.10939429482034790e+00,
        1.76599577681953690e+00,
        6.37073564722639207e-01,
        4.43791532856113058e-01,
        2.96631078547720417e+00,
        1.84106719737717928e+00,
        1.30363890771218860e+00,
        1.57841679313396277e+00,
        1.20654733506073608e+00,
    ];

    const EXPONENTIAL_20: [f64; 20] = [
        8.34258544171394278e-02,
        1.36256987240634730e+00,
        2.72121696893315645e+00,
        3.79647942082692647e-01,
        1.00237738948006894e+00,
        5.48860337907314744e+00,
        1.32405622119834056e-02,
        7.95647851532727546e-01,
        5.88819851677123141e-01,
        4.31763158434152194e-01,
        7.11963818852406338e-01,
        5.42781846836389303e-01,
        1.28959479096025031e+00,
        4.14645629785158010e-01,
        1.13651082113276725e+00,
        3.66597817108925861e-01,
        1.36916867729300923e-01,
        1.40770533480122112e-01,
        1.61420372066670836e+00,
        2.08112923432145402e+00,
    ];

    fn assert_close(sample: &[f64], w_ref: f64, p_ref: f64) {
        let out = shapiro_wilk(sample).unwrap();
        assert!(
            (out.w - w_ref).abs() <= 1e-7,
            "W = {} vs reference {w_ref}",
            out.w
        );
        assert!(
            (out.p_value - p_ref).abs() <= 1e-6 + 1e-3 * p_ref,
            "p = {} vs reference {p_ref}",
            out.p_value
        );
    }

    #[test]
    fn matches_the_reference_implementation_on_normal_samples() {
        assert_close(&NORMAL_12, 0.925083782579643, 0.330896923294406);
        assert_close(&NORMAL_25, 0.961661780514408, 0.448557481579288);
    }

    #[test]
    fn rejects_an_exponential_sample() {
        assert_close(&EXPONENTIAL_20, 0.722613878517876, 0.000074537488437);
        let out = shapiro_wilk(&EXPONENTIAL_20).unwrap();
        assert!(out.p_value < 0.001);
    }

    const NORMAL_100: [f64; 100] = [
        -3.45982331508527764e-03,
        4.66275959521440797e-02,
        -8.88697387919797244e-01,
        6.74452287350791185e-02,
        6.58241080382469090e-01,
        -7.71641109643454115e-01,
        1.38944508700611008e-01,
        6.60460507116770290e-01,
        -1.32914089843318806e+00,
        -1.78716420984954272e-01,
        3.72846283212362462e-01,
        5.28378474542763432e-01,
        6.93855867450733355e-01,
        -8.46862187256372634e-01,
        1.95975031461806087e-01,
        -5.38515232264837218e-01,
        4.70220325879226131e-01,
        -1.10223832795043841e+00,
        7.72838478260695350e-02,
        1.15463888171278528e+00,
        -9.44061047303446421e-01,
        1.45901873501013246e+00,
        -3.92994456621072186e-01,
        1.55901433391907485e-01,
        1.07865889081307698e+00,
        1.73646832404358131e-01,
        -7.46721727086623877e-01,
        6.23700400679591330e-02,
        -1.21838066506345521e+00,
        7.88640462819399035e-01,
        5.89235042627262229e-01,
        2.50814623762350175e+00,
        -2.38005684508029480e+00,
        1.07402512074506462e+00,
        1.05589804225363237e+00,
        -5.11425680394509974e-01,
        1.54150276501692707e+00,
        5.51019161759603970e-01,
        -8.98192038151861327e-01,
        -3.07463574439446607e-01,
        2.17144642381945863e-01,
        6.16351051077034806e-01,
        -2.13156732195742205e+00,
        -1.09285551688450822e+00,
        2.98672185851631966e-01,
        -3.36704341010102659e-01,
        1.31790818040572333e+00,
        7.47145054034123901e-01,
        1.68686197431425905e-01,
        3.29357245134052512e-01,
        -8.41769990177720029e-01,
        -1.79428703464099226e-01,
        -1.24780764303632763e+00,
        -4.42692725383442565e-01,
        -7.46632212101603576e-01,
        7.37741774341930667e-01,
        -2.45467766032267304e-01,
        -4.75305778970177173e-01,
        1.40686765594834440e+00,
        -1.38487420064582967e+00,
        -8.15854352465882060e-02,
        2.17233507615010790e+00,
        -9.72061647066936985e-01,
        -1.81232817547949593e-01,
        2.66125781506085679e-01,
        4.15152934535878981e-01,
        -4.74012449307995298e-01,
        -1.65360264469355722e+00,
        7.48740888724924392e-01,
        3.36886196767473944e-01,
        -3.49217140109273128e-01,
        3.40044487510233362e-01,
        -1.09711198071723603e+00,
        -3.89222539764429498e-01,
        7.51621174352365196e-01,
        -1.03536222489819107e+00,
        -1.16278768890762141e+00,
        4.57141420652914909e-01,
        6.28075032158482593e-01,
        -2.07716826528374954e+00,
        3.24505651738213552e-01,
        -1.33705020172507694e+00,
        -4.20690605621184543e-01,
        -1.33343788325755841e+00,
        -1.71371525678689268e-01,
        -9.40073333383232401e-01,
        -9.30548476494241494e-02,
        2.20152796884793345e+00,
        -5.60213336227849412e-01,
        5.39464823752086875e-02,
        -1.25532844461064519e+00,
        -2.06396272352543031e+00,
        8.56279877264434441e-01,
        1.13889077977696568e-01,
        -1.29900180016245398e-01,
        3.71920716596062850e-01,
        2.43630394029055786e-01,
        -9.94449385247239248e-01,
        -3.16962346486088786e-01,
        1.39054478229068523e-01,
    ];

    #[test]
    fn a_large_normal_sample_is_accepted() {
        assert_close(&NORMAL_100, 0.989356164004351, 0.612795901107637);
    }

    #[test]
    fn unusable_samples_are_refused() {
        assert!(shapiro_wilk(&[1.0; 11]).is_err()); // too short
        assert!(shapiro_wilk(&[2.5; 20]).is_err()); // zero variance
        let mut with_inf = NORMAL_12.to_vec();
        with_inf[3] = f64::INFINITY;
        assert!(shapiro_wilk(&with_inf).is_err());
    }
}
