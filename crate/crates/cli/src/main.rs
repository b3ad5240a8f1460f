//! Batch CLI over the coherent-intertwiner library.
//!
//! Matrices travel as `{"n": N, "re": [[...]], "im": [[...]]}` JSON. Reports
//! go to `--output` (stdout by default), distributions to `--csv`. Failures
//! print `{"error": code, "message": ...}` on stderr and exit with 2 for
//! domain-type errors, 1 for I/O problems. Identical seeds give
//! byte-identical outputs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use sostar::analytics;
use sostar::antisym::{self, AntisymMatrix};
use sostar::fock;
use sostar::group;
use sostar::io::{MatrixJson, SpinorJson};
use sostar::linalg::{self, CMatrix};
use sostar::semiclassical::{self, SpinorFamily};

#[derive(Parser)]
#[command(
    name = "sostar",
    about = "Coherent intertwiner states for SO*(2N): canonical forms, observables, semiclassical polyhedra and a Fock-space oracle"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check antisymmetry and membership in the bounded domain.
    Validate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Canonical decomposition zeta = U M U^T.
    Decompose {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Relative tolerance for grouping equal singular values.
        #[arg(long, default_value_t = antisym::TOL_MULT)]
        tol: f64,
    },
    /// Area statistics and generator expectation values.
    Expect {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Total-area distribution of a rank-2 label (CSV "J,P").
    Distribution {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 50)]
        jmax: u32,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Spinor families, normals, closure defect and symmetry classification.
    Semiclassical {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Stabilizer descriptor plus a seeded sample of it.
    Symmetry {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Random cross-validation of every closed form against the Fock oracle.
    Oracle {
        /// Number of intertwiner legs.
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 30)]
        jmax: u32,
        #[arg(long, default_value_t = 10)]
        trials: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// The explicit 4-leg example: two degenerate families, their normals,
    /// the Sp(4) stabilizer and the family-mixing transformation.
    #[command(name = "example-4leg")]
    Example4Leg {
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, label, message) = match &err {
                CliError::Domain(e) => (2u8, e.code(), e.to_string()),
                CliError::Io(m) => (1u8, "io_error", m.clone()),
            };
            let diagnostic = serde_json::json!({ "error": label, "message": message });
            eprintln!("{diagnostic}");
            ExitCode::from(code)
        }
    }
}

enum CliError {
    Domain(sostar::Error),
    Io(String),
}

impl From<sostar::Error> for CliError {
    fn from(e: sostar::Error) -> Self {
        CliError::Domain(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn read_matrix(path: &Path) -> Result<AntisymMatrix, CliError> {
    let text = std::fs::read_to_string(path)?;
    let parsed: MatrixJson = serde_json::from_str(&text)
        .map_err(|e| CliError::Domain(sostar::Error::Parse(e.to_string())))?;
    Ok(AntisymMatrix::new(parsed.to_matrix()?)?)
}

fn emit<T: Serialize>(value: &T, output: Option<&Path>) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    match output {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Validate { input, output } => {
            let text = std::fs::read_to_string(&input)?;
            let parsed: MatrixJson = serde_json::from_str(&text)
                .map_err(|e| CliError::Domain(sostar::Error::Parse(e.to_string())))?;
            let report = antisym::validate_domain(&parsed.to_matrix()?)?;
            emit(&report, output.as_deref())
        }
        Command::Decompose { input, output, tol } => {
            let zeta = read_matrix(&input)?;
            let form = antisym::canonical_decompose(&zeta)?;
            let groups = antisym::group_multiplicities(&form.lambdas, tol);
            let reconstruction_residual =
                linalg::fro_norm(&(form.reconstruct() - zeta.mat()));
            let unitarity_residual = linalg::fro_norm(
                &(form.u.adjoint() * &form.u - linalg::identity(zeta.n())),
            );
            #[derive(Serialize)]
            struct DecomposeReport {
                n: usize,
                u: MatrixJson,
                lambdas: Vec<f64>,
                half_rank: usize,
                padding: usize,
                groups: Vec<GroupEntry>,
                reconstruction_residual: f64,
                unitarity_residual: f64,
            }
            #[derive(Serialize)]
            struct GroupEntry {
                lambda: f64,
                multiplicity: usize,
            }
            emit(
                &DecomposeReport {
                    n: zeta.n(),
                    u: MatrixJson::from_matrix(&form.u),
                    lambdas: form.lambdas.clone(),
                    half_rank: form.half_rank,
                    padding: form.padding,
                    groups: groups
                        .into_iter()
                        .map(|(lambda, multiplicity)| GroupEntry {
                            lambda,
                            multiplicity,
                        })
                        .collect(),
                    reconstruction_residual,
                    unitarity_residual,
                },
                output.as_deref(),
            )
        }
        Command::Expect { input, output } => {
            let zeta = read_matrix(&input)?;
            let label = analytics::CoherentLabel::new(zeta.clone())?;
            let area = analytics::area_report(&label);
            let elements = analytics::matrix_elements(&zeta, &zeta)?;
            #[derive(Serialize)]
            struct ExpectReport {
                area: analytics::AreaReport,
                e: MatrixJson,
                f: MatrixJson,
                ftilde: MatrixJson,
            }
            emit(
                &ExpectReport {
                    area,
                    e: MatrixJson::from_matrix(&elements.e),
                    f: MatrixJson::from_matrix(&elements.f),
                    ftilde: MatrixJson::from_matrix(&elements.ftilde),
                },
                output.as_deref(),
            )
        }
        Command::Distribution { input, jmax, csv } => {
            let zeta = read_matrix(&input)?;
            let distribution = analytics::area_distribution(&zeta, jmax)?;
            let mut text = String::from("J,P\n");
            for (j, p) in &distribution {
                text.push_str(&format!("{j},{p}\n"));
            }
            match csv {
                Some(path) => std::fs::write(path, text)?,
                None => print!("{text}"),
            }
            Ok(())
        }
        Command::Semiclassical { input, output } => {
            let zeta = read_matrix(&input)?;
            let family = semiclassical::extract_spinor_families(&zeta)?;
            let descriptor = semiclassical::symmetry_group_of(&zeta)?;
            emit(
                &family_report(&family, &descriptor),
                output.as_deref(),
            )
        }
        Command::Symmetry {
            input,
            output,
            seed,
        } => {
            let zeta = read_matrix(&input)?;
            let descriptor = semiclassical::symmetry_group_of(&zeta)?;
            let w = semiclassical::sample_symmetry(&descriptor, seed)?;
            let stabilizer_residual = semiclassical::stabilizer_residual(&descriptor, &w);
            let form = antisym::canonical_decompose(&zeta)?;
            let moved = &form.u * &w;
            let zeta_invariance_residual = linalg::fro_norm(
                &(&moved * form.block_matrix(zeta.n()) * moved.transpose() - zeta.mat()),
            );
            #[derive(Serialize)]
            struct SymmetryReport {
                descriptor: semiclassical::SymmetryDescriptor,
                seed: u64,
                w: MatrixJson,
                stabilizer_residual: f64,
                zeta_invariance_residual: f64,
            }
            emit(
                &SymmetryReport {
                    descriptor,
                    seed,
                    w: MatrixJson::from_matrix(&w),
                    stabilizer_residual,
                    zeta_invariance_residual,
                },
                output.as_deref(),
            )
        }
        Command::Oracle {
            n,
            jmax,
            trials,
            seed,
            output,
        } => {
            let report = oracle_report(n, jmax, trials, seed)?;
            emit(&report, output.as_deref())
        }
        Command::Example4Leg { output } => emit(&four_leg_report()?, output.as_deref()),
    }
}

#[derive(Serialize)]
struct FamilyEntry {
    lambda: f64,
    total_area: f64,
    spinors: Vec<SpinorJson>,
    normals: Vec<[f64; 3]>,
}

#[derive(Serialize)]
struct FamilyReport {
    families: Vec<FamilyEntry>,
    coarse_defect: f64,
    symmetry: semiclassical::SymmetryDescriptor,
}

fn family_report(
    family: &SpinorFamily,
    descriptor: &semiclassical::SymmetryDescriptor,
) -> FamilyReport {
    let families = (0..family.k())
        .map(|alpha| FamilyEntry {
            lambda: family.lambdas[alpha],
            total_area: family.total_area(alpha),
            spinors: family.families[alpha]
                .iter()
                .map(|z| SpinorJson {
                    x: [z.x.re, z.x.im],
                    y: [z.y.re, z.y.im],
                })
                .collect(),
            normals: semiclassical::face_normals(family, alpha),
        })
        .collect();
    FamilyReport {
        families,
        coarse_defect: semiclassical::coarse_closure_defect(family),
        symmetry: descriptor.clone(),
    }
}

#[derive(Serialize)]
struct OracleReport {
    n: usize,
    j_max: u32,
    trials: u32,
    seed: u64,
    max_overlap_deviation: f64,
    max_element_deviation: f64,
    max_mean_deviation: f64,
    max_covariance_deviation: f64,
    max_distribution_deviation: f64,
}

/// Draws random in-domain labels, rescaling until the tail rule fits the
/// requested cutoff, and measures the worst disagreement between every
/// closed form and the truncated oracle.
fn oracle_report(n: usize, jmax: u32, trials: u32, seed: u64) -> Result<OracleReport, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let limits = fock::SectorLimits::new(n, jmax);
    let mut report = OracleReport {
        n,
        j_max: jmax,
        trials,
        seed,
        max_overlap_deviation: 0.0,
        max_element_deviation: 0.0,
        max_mean_deviation: 0.0,
        max_covariance_deviation: 0.0,
        max_distribution_deviation: 0.0,
    };
    for _ in 0..trials {
        let mut zeta = AntisymMatrix::new(linalg::random_antisymmetric(&mut rng, n, 0.4))?;
        let mut omega = AntisymMatrix::new(linalg::random_antisymmetric(&mut rng, n, 0.3))?;
        // Shrink until the suggested cutoff fits inside --jmax.
        for _ in 0..60 {
            match fock::suggest_j_max(&[&zeta, &omega], 1e-9, limits) {
                Ok(m) if m <= jmax => break,
                _ => {
                    zeta = AntisymMatrix::new(zeta.mat().map(|z| z * 0.9))?;
                    omega = AntisymMatrix::new(omega.mat().map(|z| z * 0.9))?;
                }
            }
        }

        let oracle = fock::oracle_cross_elements(&omega, &zeta, limits)?;
        let closed = analytics::matrix_elements(&omega, &zeta)?;
        let closed_overlap = analytics::overlap(&omega, &zeta)?;
        report.max_overlap_deviation = report
            .max_overlap_deviation
            .max((oracle.overlap - closed_overlap).norm());
        for a in 0..n {
            for b in 0..n {
                report.max_element_deviation = report
                    .max_element_deviation
                    .max((oracle.e[(a, b)] - closed.e[(a, b)]).norm())
                    .max((oracle.f[(a, b)] - closed.f[(a, b)]).norm())
                    .max((oracle.ftilde[(a, b)] - closed.ftilde[(a, b)]).norm());
            }
        }

        let moments = fock::oracle_area_moments(&zeta, limits)?;
        let area = analytics::area_report(&analytics::CoherentLabel::new(zeta.clone())?);
        for a in 0..n {
            report.max_mean_deviation = report
                .max_mean_deviation
                .max((moments.means[a] - area.per_leg_mean[a]).abs());
            for b in 0..n {
                let oracle_cov = moments.second[a][b] - moments.means[a] * moments.means[b];
                report.max_covariance_deviation = report
                    .max_covariance_deviation
                    .max((oracle_cov - area.covariance[a][b]).abs());
            }
        }

        // Rank-2 distribution check when the label has half-rank one.
        if antisym::canonical_decompose(&zeta)?.half_rank == 1 {
            let oracle_dist = fock::oracle_distribution(&zeta, limits)?;
            let closed_dist = analytics::area_distribution(&zeta, jmax)?;
            for ((_, p_oracle), (_, p_closed)) in oracle_dist.iter().zip(closed_dist.iter()) {
                report.max_distribution_deviation = report
                    .max_distribution_deviation
                    .max((p_oracle - p_closed).abs());
            }
        }
    }
    Ok(report)
}

#[derive(Serialize)]
struct FourLegReport {
    zeta: MatrixJson,
    normalization: f64,
    reconstruction_residual: f64,
    /// Families in the display normalization: unit total area per family.
    report: FamilyReport,
    mixing_w: MatrixJson,
    mixed_normals: Vec<Vec<[f64; 3]>>,
    mixed_total_areas: Vec<f64>,
    mixed_coarse_defect: f64,
}

/// The 4-leg example with both singular values at sqrt(1/2): two degenerate
/// polyhedron families, an Sp(4) stabilizer, and the block-Hadamard element
/// of it that mixes the families into non-degenerate tetrahedra.
fn four_leg_report() -> Result<FourLegReport, CliError> {
    let u = group::four_leg_unitary();
    let zeta = group::four_leg_zeta();
    let lambda = 0.5f64.sqrt();
    // Unit-area display normalization for the family spinors.
    let family =
        SpinorFamily::from_unitary(u.clone(), vec![lambda, lambda], vec![1.0, 1.0])?;
    let descriptor = semiclassical::symmetry_group_of(&zeta)?;
    let report = family_report(&family, &descriptor);

    let form = antisym::canonical_decompose(&zeta)?;
    let reconstruction_residual = linalg::fro_norm(&(form.reconstruct() - zeta.mat()));

    // W = sqrt(1/2) [[1, 1], [1, -1]] in 2x2 blocks mixes the two families.
    let h = Complex64::new(0.5f64.sqrt(), 0.0);
    let mut w = CMatrix::zeros(4, 4);
    for i in 0..2 {
        w[(i, i)] = h;
        w[(i, i + 2)] = h;
        w[(i + 2, i)] = h;
        w[(i + 2, i + 2)] = -h;
    }
    let mixed = semiclassical::apply_symmetry(&family, &w)?;
    let mixed_normals = (0..mixed.k())
        .map(|alpha| semiclassical::face_normals(&mixed, alpha))
        .collect();
    let mixed_total_areas = (0..mixed.k()).map(|alpha| mixed.total_area(alpha)).collect();

    Ok(FourLegReport {
        zeta: MatrixJson::from_matrix(zeta.mat()),
        normalization: analytics::normalization(&zeta)?,
        reconstruction_residual,
        report,
        mixing_w: MatrixJson::from_matrix(&w),
        mixed_normals,
        mixed_total_areas,
        mixed_coarse_defect: semiclassical::coarse_closure_defect(&mixed),
    })
}
