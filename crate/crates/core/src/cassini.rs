//! Cassini state 1, the untangling transformation and action–angle variables.
//!
//! Around the equilibrium `(Sigma*, 0)` the quadratic part of the averaged
//! Hamiltonian has no action–angle cross terms, so it splits as
//! `dSigma^T A dSigma + sigma^T B sigma`. A linear map `dSigma = M Sigma'`,
//! `sigma = N sigma'` with `N = M^-T` is symplectic; choosing the columns of
//! `M` as eigenvectors of `B A` makes both blocks diagonal. Each decoupled
//! oscillator `mu_S Sigma'^2 + mu_s sigma'^2` is then written in polar form
//! `Sigma' = sqrt(2U/U*) cos u`, `sigma' = sqrt(2 U U*) sin u`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::hamiltonian::AveragedHamiltonian;
use crate::jet::TaylorPoly;
use crate::pseries::{PoissonSeries, SeriesBuilder, Trig};

const MAX_NEWTON_STEPS: usize = 100;
const RESIDUAL_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct CassiniState {
    /// `(Sigma1*, Sigma3*)` in units of `C n`.
    pub sigma_star: [f64; 2],
    pub k_star: f64,
    /// Signed `i - K*`.
    pub eps_signed: f64,
    /// `|K* - i|`.
    pub eps_star: f64,
    /// Normalized residuals of the two equilibrium equations.
    pub residuals: [f64; 2],
    pub iterations: usize,
}

impl CassiniState {
    /// Whether the spin axis lies beyond the orbit normal (`K* > i`).
    pub fn beyond_normal(&self) -> bool {
        self.eps_signed < 0.0
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "Sigma1 = {:.17e}", self.sigma_star[0]);
        let _ = writeln!(s, "Sigma3 = {:.17e}", self.sigma_star[1]);
        let _ = writeln!(s, "K = {:.17e}", self.k_star);
        let _ = writeln!(s, "eps = {:.17e}", self.eps_star);
        let _ = writeln!(s, "eps_arcmin = {:.12}", self.eps_star * crate::params::ARCMIN_PER_RAD);
        let _ = writeln!(s, "side = {}", if self.beyond_normal() { "K>i" } else { "K<i" });
        let _ = writeln!(s, "residual1 = {:e}", self.residuals[0]);
        let _ = writeln!(s, "residual3 = {:e}", self.residuals[1]);
        let _ = writeln!(s, "iterations = {}", self.iterations);
        s
    }
}

/// Gradient of `<H>` in the actions at `sigma = 0`, each component divided by
/// the magnitude of the terms that balance in it.
fn normalized_residual(h: &AveragedHamiltonian, s: [f64; 2]) -> Result<([f64; 2], [[f64; 2]; 2])> {
    let poly = h.jet([s[0], s[1], 0.0, 0.0], 2)?;
    let g = poly.gradient();
    let hess = poly.hessian();
    let scale = residual_scales(h);
    let f = [g[0] / scale[0], g[1] / scale[1]];
    let jac = [
        [hess[0][0] / scale[0], hess[0][1] / scale[0]],
        [hess[1][0] / scale[1], hess[1][1] / scale[1]],
    ];
    Ok((f, jac))
}

fn residual_scales(h: &AveragedHamiltonian) -> [f64; 2] {
    let p = h.params();
    let pot = (p.c20() * h.h20()).abs() / p.c + (p.c22 * h.h22()).abs() / p.c;
    [1.5, (p.node_dot / p.n).abs() + pot]
}

/// Damped Newton solve for the Cassini state 1 equilibrium at `sigma = 0`.
pub fn find_equilibrium(h: &AveragedHamiltonian) -> Result<CassiniState> {
    let inc = h.params().i;
    let mut s = [1.5, 1.5 * (1.0 - inc.cos())];
    let (mut f, mut jac) = normalized_residual(h, s)?;
    let norm = |f: [f64; 2]| f[0].abs().max(f[1].abs());
    let mut trace = vec![norm(f)];
    let mut iterations = 0;
    while norm(f) >= RESIDUAL_TOL {
        if iterations == MAX_NEWTON_STEPS {
            return Err(Error::EquilibriumNotFound { iterations, trace });
        }
        iterations += 1;
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let jac_scale = jac.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
        if det.abs() <= 1e-14 * jac_scale * jac_scale {
            return Err(Error::DegenerateEquilibrium { det });
        }
        let step = [
            (jac[1][1] * f[0] - jac[0][1] * f[1]) / det,
            (-jac[1][0] * f[0] + jac[0][0] * f[1]) / det,
        ];
        let mut t = 1.0;
        loop {
            let trial = [s[0] - t * step[0], s[1] - t * step[1]];
            let ok = trial[0] > 0.0 && trial[1] > 0.0 && trial[1] < 2.0 * trial[0];
            if ok {
                let (ft, jt) = normalized_residual(h, trial)?;
                if norm(ft) < norm(f) || t < 1e-12 {
                    s = trial;
                    f = ft;
                    jac = jt;
                    break;
                }
            }
            t *= 0.5;
            if t < 1e-12 {
                return Err(Error::EquilibriumNotFound { iterations, trace });
            }
        }
        trace.push(norm(f));
    }
    let k_star = AveragedHamiltonian::cos_k(s[0], s[1]).acos();
    let eps_signed = inc - k_star;
    Ok(CassiniState {
        sigma_star: s,
        k_star,
        eps_signed,
        eps_star: eps_signed.abs(),
        residuals: [f[0].abs(), f[1].abs()],
        iterations,
    })
}

/// Taylor expansion of `<H>` in `(dSigma1, dSigma3, sigma1, sigma3)` about the
/// equilibrium, through total degree `order + 2`, with the constant and
/// linear parts removed.
pub fn taylor_expand(h: &AveragedHamiltonian, eq: &CassiniState, order: usize) -> Result<TaylorPoly> {
    let mut poly = h.jet(center(eq), checked_degree(order + 2)?)?;
    check_linear(&poly)?;
    poly.drop_below(2);
    Ok(poly)
}

/// Largest polynomial degree accepted by the expansion routines.
pub const MAX_EXPANSION_DEGREE: usize = 120;

fn checked_degree(d: usize) -> Result<usize> {
    if d > MAX_EXPANSION_DEGREE {
        return Err(Error::Config(format!(
            "expansion degree {d} exceeds {MAX_EXPANSION_DEGREE}"
        )));
    }
    Ok(d)
}

fn center(eq: &CassiniState) -> [f64; 4] {
    [eq.sigma_star[0], eq.sigma_star[1], 0.0, 0.0]
}

fn check_linear(poly: &TaylorPoly) -> Result<()> {
    let g = poly.gradient();
    let worst = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if worst >= 1e-10 {
        return Err(Error::InvalidDomain(format!(
            "expansion point is not an equilibrium: gradient {g:?}"
        )));
    }
    Ok(())
}

/// Linear symplectic map that diagonalizes the quadratic part, plus the
/// action–angle scalings of the two oscillators.
#[derive(Clone, Debug, PartialEq)]
pub struct UntangledForm {
    /// `dSigma = M Sigma'`.
    pub action_map: [[f64; 2]; 2],
    /// `sigma = N sigma'`, `N = M^-T`, normalized so `N_jj = 1`.
    pub angle_map: [[f64; 2]; 2],
    /// Diagonal coefficients `(mu_Sigma'1, mu_Sigma'3, mu_sigma'1, mu_sigma'3)`.
    pub mu_prime: [f64; 4],
    pub u_star: [f64; 2],
    /// Frequencies in units of `n`.
    pub omega: [f64; 2],
    /// Frequencies in rad/day.
    pub omega_u: [f64; 2],
}

impl UntangledForm {
    /// The full map `(dSigma, sigma) = S (Sigma', sigma')` as a 4x4 matrix.
    pub fn s_matrix(&self) -> [[f64; 4]; 4] {
        let (m, n) = (self.action_map, self.angle_map);
        let mut s = [[0.0; 4]; 4];
        for r in 0..2 {
            for c in 0..2 {
                s[r][c] = m[r][c];
                s[r + 2][c + 2] = n[r][c];
            }
        }
        s
    }

    /// `(Sigma', sigma')` of mode `j` as functions of `(U_j, u_j)`.
    pub fn polar(&self, j: usize, action: f64, angle: f64) -> (f64, f64) {
        let us = self.u_star[j];
        (
            (2.0 * action / us).sqrt() * angle.cos(),
            (2.0 * action * us).sqrt() * angle.sin(),
        )
    }

    /// Original deviations `(dSigma1, dSigma3, sigma1, sigma3)` at `(U, u)`.
    pub fn to_original(&self, actions: [f64; 2], angles: [f64; 2]) -> [f64; 4] {
        let (x1, y1) = self.polar(0, actions[0], angles[0]);
        let (x3, y3) = self.polar(1, actions[1], angles[1]);
        let (m, n) = (self.action_map, self.angle_map);
        [
            m[0][0] * x1 + m[0][1] * x3,
            m[1][0] * x1 + m[1][1] * x3,
            n[0][0] * y1 + n[0][1] * y3,
            n[1][0] * y1 + n[1][1] * y3,
        ]
    }

    /// Inverse of [`UntangledForm::to_original`].
    pub fn from_original(&self, z: [f64; 4]) -> ([f64; 2], [f64; 2]) {
        // M^-1 = N^T and N^-1 = M^T
        let (m, n) = (self.action_map, self.angle_map);
        let x = [
            n[0][0] * z[0] + n[1][0] * z[1],
            n[0][1] * z[0] + n[1][1] * z[1],
        ];
        let y = [
            m[0][0] * z[2] + m[1][0] * z[3],
            m[0][1] * z[2] + m[1][1] * z[3],
        ];
        let mut actions = [0.0; 2];
        let mut angles = [0.0; 2];
        for j in 0..2 {
            let us = self.u_star[j];
            actions[j] = 0.5 * (x[j] * x[j] * us + y[j] * y[j] / us);
            angles[j] = (y[j] / us.sqrt()).atan2(x[j] * us.sqrt());
        }
        (actions, angles)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let m = self.s_matrix();
        for (r, row) in m.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:.17e}")).collect();
            let _ = writeln!(s, "S{} = {}", r + 1, cells.join(" "));
        }
        let names = ["mu_Sigma1", "mu_Sigma3", "mu_sigma1", "mu_sigma3"];
        for (name, v) in names.iter().zip(self.mu_prime) {
            let _ = writeln!(s, "{name} = {v:.17e}");
        }
        let _ = writeln!(s, "U1_star = {:.17e}", self.u_star[0]);
        let _ = writeln!(s, "U3_star = {:.17e}", self.u_star[1]);
        let _ = writeln!(s, "omega_u1 = {:.17e}", self.omega_u[0]);
        let _ = writeln!(s, "omega_u3 = {:.17e}", self.omega_u[1]);
        s
    }
}

fn mat_mul(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut c = [[0.0; 2]; 2];
    for r in 0..2 {
        for k in 0..2 {
            c[r][k] = a[r][0] * b[0][k] + a[r][1] * b[1][k];
        }
    }
    c
}

fn transpose(a: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

/// `M^T Q M` for symmetric `Q`.
pub fn congruence(q: [[f64; 2]; 2], m: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    mat_mul(transpose(m), mat_mul(q, m))
}

/// Diagonalizes the quadratic form with Hessian `hess` (in
/// `(dSigma1, dSigma3, sigma1, sigma3)`) and sets frequencies in units of `n`;
/// `n` converts them to rad/day.
pub fn untangle(hess: [[f64; 4]; 4], n: f64) -> Result<UntangledForm> {
    let scale = hess.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    for r in 0..2 {
        for c in 2..4 {
            if hess[r][c].abs() > 1e-10 * scale || hess[c][r].abs() > 1e-10 * scale {
                return Err(Error::Unsupported(format!(
                    "quadratic part has action-angle cross terms ({:e})",
                    hess[r][c]
                )));
            }
        }
    }
    let a = [
        [0.5 * hess[0][0], 0.5 * hess[0][1]],
        [0.5 * hess[1][0], 0.5 * hess[1][1]],
    ];
    let b = [
        [0.5 * hess[2][2], 0.5 * hess[2][3]],
        [0.5 * hess[3][2], 0.5 * hess[3][3]],
    ];
    let c = mat_mul(b, a);
    let tr = c[0][0] + c[1][1];
    let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
    let disc = tr * tr - 4.0 * det;
    if disc < 0.0 {
        return Err(Error::NotElliptic(format!(
            "complex eigenvalues of the quadratic part (discriminant {disc:e})"
        )));
    }
    let root = disc.sqrt();
    let lambdas = if tr >= 0.0 {
        let big = 0.5 * (tr + root);
        [big, if big != 0.0 { det / big } else { 0.0 }]
    } else {
        let big = 0.5 * (tr - root);
        [if big != 0.0 { det / big } else { 0.0 }, big]
    };
    for &l in &lambdas {
        if !(l > 0.0) {
            return Err(Error::NotElliptic(format!(
                "squared frequency {l:e} is not positive (saddle direction)"
            )));
        }
    }
    let mut m = [[0.0; 2]; 2];
    for (j, &l) in lambdas.iter().enumerate() {
        let v1 = [c[0][1], l - c[0][0]];
        let v2 = [l - c[1][1], c[1][0]];
        let n1 = v1[0].hypot(v1[1]);
        let n2 = v2[0].hypot(v2[1]);
        let v = if n1 == 0.0 && n2 == 0.0 {
            // C is a multiple of the identity
            if j == 0 { [1.0, 0.0] } else { [0.0, 1.0] }
        } else if n1 >= n2 {
            [v1[0] / n1, v1[1] / n1]
        } else {
            [v2[0] / n2, v2[1] / n2]
        };
        m[0][j] = v[0];
        m[1][j] = v[1];
    }
    let det_m = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det_m.abs() < 1e-14 {
        return Err(Error::ResonantQuadratic(
            2.0 * lambdas[0].sqrt(),
            2.0 * lambdas[1].sqrt(),
        ));
    }
    // N = M^-T
    let mut nm = [
        [m[1][1] / det_m, -m[1][0] / det_m],
        [-m[0][1] / det_m, m[0][0] / det_m],
    ];
    // the longitudinal mode is the one whose angle column leans on sigma1
    let lean = |col: usize, nm: &[[f64; 2]; 2]| {
        nm[0][col].abs() / (nm[0][col].abs() + nm[1][col].abs())
    };
    if lean(1, &nm) > lean(0, &nm) {
        for r in 0..2 {
            m[r].swap(0, 1);
            nm[r].swap(0, 1);
        }
    }
    for j in 0..2 {
        let d = nm[j][j];
        if d == 0.0 {
            return Err(Error::NotElliptic("mode has no diagonal angle component".into()));
        }
        for r in 0..2 {
            nm[r][j] /= d;
            m[r][j] *= d;
        }
    }
    let da = congruence(a, m);
    let db = congruence(b, nm);
    let mu = [da[0][0], da[1][1], db[0][0], db[1][1]];
    let mut omega = [0.0; 2];
    let mut u_star = [0.0; 2];
    for j in 0..2 {
        let (ms, mq) = (mu[j], mu[j + 2]);
        if ms * mq <= 0.0 {
            return Err(Error::NotElliptic(format!(
                "mode {} has coefficients of opposite sign ({ms:e}, {mq:e})",
                2 * j + 1
            )));
        }
        omega[j] = 2.0 * (ms * mq).sqrt() * ms.signum();
        u_star[j] = (ms / mq).sqrt();
    }
    if (omega[0] - omega[1]).abs() <= 1e-9 * omega[0].abs().max(omega[1].abs()) {
        return Err(Error::ResonantQuadratic(omega[0] * n, omega[1] * n));
    }
    Ok(UntangledForm {
        action_map: m,
        angle_map: nm,
        mu_prime: mu,
        u_star,
        omega,
        omega_u: [omega[0] * n, omega[1] * n],
    })
}

/// Powers `(Sigma')^a (sigma')^b` of one oscillator in its polar variables.
struct ModePowers {
    table: Vec<Vec<PoissonSeries>>,
}

impl ModePowers {
    fn new(mode: usize, u_star: f64, bound: u32) -> Self {
        let harmonic = |k: i32| if mode == 0 { [k, 0] } else { [0, k] };
        let pow = if mode == 0 { [1, 0] } else { [0, 1] };
        let x = PoissonSeries::monomial(pow, harmonic(1), Trig::Cos, (2.0 / u_star).sqrt(), bound);
        let y = PoissonSeries::monomial(pow, harmonic(1), Trig::Sin, (2.0 * u_star).sqrt(), bound);
        let n = bound as usize;
        let mut table: Vec<Vec<PoissonSeries>> = Vec::with_capacity(n + 1);
        let mut xa = PoissonSeries::constant(1.0, bound);
        for a in 0..=n {
            let mut row = Vec::with_capacity(n + 1 - a);
            let mut cur = xa.clone();
            for _ in 0..=(n - a) {
                let next = cur.mul(&y, bound);
                row.push(cur);
                cur = next;
            }
            table.push(row);
            xa = xa.mul(&x, bound);
        }
        ModePowers { table }
    }

    fn get(&self, a: usize, b: usize) -> &PoissonSeries {
        &self.table[a][b]
    }
}

/// Full Hamiltonian in the action–angle variables of the untangled
/// oscillators, truncated at doubled action degree `bound`. The quadratic
/// block is replaced by its exact value `omega . U` once its residual
/// harmonics are checked to vanish.
pub fn to_action_angle(
    h: &AveragedHamiltonian,
    eq: &CassiniState,
    form: &UntangledForm,
    bound: u32,
) -> Result<PoissonSeries> {
    if bound < 2 {
        return Err(Error::Config("action-angle bound must be at least 2".into()));
    }
    let degree = checked_degree(bound as usize)?;
    let mut poly = h.expand(center(eq), form.action_map, form.angle_map, degree)?;
    check_linear(&poly)?;
    poly.drop_below(2);

    let (p1, p3) = rayon::join(
        || ModePowers::new(0, form.u_star[0], bound),
        || ModePowers::new(1, form.u_star[1], bound),
    );
    let mut builder = SeriesBuilder::new(bound);
    for (e, c) in &poly.coeffs {
        let [a, b, cc, d] = e.map(|x| x as usize);
        builder.add_product(p1.get(a, cc), p3.get(b, d), *c);
    }
    let series = builder.finish();

    let quad = series.homogeneous(2);
    let exact = PoissonSeries::from_monomials(
        [
            crate::pseries::Monomial::new([2, 0], [0, 0], Trig::Cos, form.omega[0]),
            crate::pseries::Monomial::new([0, 2], [0, 0], Trig::Cos, form.omega[1]),
        ],
        bound,
    );
    let residual = (&quad - &exact).max_abs_coeff();
    let w = form.omega[0].abs().max(form.omega[1].abs());
    if residual > 1e-8 * w {
        return Err(Error::NotElliptic(format!(
            "quadratic block differs from omega.U by {residual:e}"
        )));
    }
    Ok(&(&series - &quad) + &exact)
}

/// Equilibrium, untangling and action–angle series in one call.
#[derive(Clone, Debug)]
pub struct Expansion {
    pub state: CassiniState,
    pub form: UntangledForm,
    pub series: PoissonSeries,
}

pub fn expand_at_cassini_state(h: &AveragedHamiltonian, bound: u32) -> Result<Expansion> {
    let state = find_equilibrium(h)?;
    let quad = taylor_expand(h, &state, 0)?;
    let form = untangle(quad.hessian(), h.params().n)?;
    let series = to_action_angle(h, &state, &form, bound)?;
    Ok(Expansion { state, form, series })
}
