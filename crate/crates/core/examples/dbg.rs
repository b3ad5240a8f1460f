use sostar::analytics::{self, CoherentLabel};
use sostar::antisym::AntisymMatrix;
use sostar::fock::{self, SectorLimits};
use sostar::linalg;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(20260810);
    for trial in 0..12 {
        let n = 2 + (trial % 3);
        let cap = match n { 2 => 0.5, 3 => 0.45, _ => 0.12 };
        let t_zeta = 0.05 + (cap - 0.05) * rng.random::<f64>();
        let t_omega = 0.05 + (cap - 0.05) * rng.random::<f64>();
        let zeta = AntisymMatrix::new(linalg::random_antisymmetric(&mut rng, n, t_zeta)).unwrap();
        let omega = AntisymMatrix::new(linalg::random_antisymmetric(&mut rng, n, t_omega)).unwrap();
        let template = SectorLimits::with_capacity(n, 0, 20_000_000);
        let j_max = fock::suggest_j_max(&[&zeta, &omega], 1e-9, template).unwrap();
        let limits = SectorLimits::with_capacity(n, j_max, 20_000_000);
        let oracle = fock::oracle_cross_elements(&omega, &zeta, limits).unwrap();
        let closed = analytics::matrix_elements(&omega, &zeta).unwrap();
        let closed_ov = analytics::overlap(&omega, &zeta).unwrap();
        let mut de: f64 = 0.0; let mut df: f64 = 0.0; let mut dft: f64 = 0.0;
        for a in 0..n { for b in 0..n {
            de = de.max((oracle.e[(a,b)] - closed.e[(a,b)]).norm());
            df = df.max((oracle.f[(a,b)] - closed.f[(a,b)]).norm());
            dft = dft.max((oracle.ftilde[(a,b)] - closed.ftilde[(a,b)]).norm());
        }}
        let dov = (oracle.overlap - closed_ov).norm();
        let moments = fock::oracle_area_moments(&zeta, limits).unwrap();
        let report = analytics::area_report(&CoherentLabel::new(zeta.clone()).unwrap());
        let mut dm: f64 = 0.0; let mut dc: f64 = 0.0;
        for a in 0..n {
            dm = dm.max((moments.means[a] - report.per_leg_mean[a]).abs());
            for b in 0..n {
                let oc = moments.second[a][b] - moments.means[a]*moments.means[b];
                dc = dc.max((oc - report.covariance[a][b]).abs());
            }
        }
        println!("trial {trial} n={n} jmax={j_max} tz={t_zeta:.3} tw={t_omega:.3} | ov {dov:.2e} E {de:.2e} F {df:.2e} Ft {dft:.2e} mean {dm:.2e} cov {dc:.2e}");
    }
}
