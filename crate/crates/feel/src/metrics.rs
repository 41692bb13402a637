//! Evaluation metrics and the benchmark experiments built on them:
//! localization RMSE, filter latency statistics, NEES consistency, paired
//! variant comparisons, and frequency sweeps.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::scenario::{run_with, RunOptions, Scenario, SimError, SimulationTrace, VariantSpec};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty trace")]
    EmptyTrace,
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Root-mean-square 2D position error over the trace, in centimeters.
pub fn rmse_cm(trace: &SimulationTrace) -> Result<f64, MetricsError> {
    if trace.rows.is_empty() {
        return Err(MetricsError::EmptyTrace);
    }
    let sum: f64 = trace
        .rows
        .iter()
        .map(|r| (r.est_x - r.truth_x).powi(2) + (r.est_y - r.truth_y).powi(2))
        .sum();
    Ok(100.0 * (sum / trace.rows.len() as f64).sqrt())
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LatencyStats {
    pub mean_ms: f64,
    pub min_ms: f64,
    pub p50_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
}

/// Distribution of per-tick filter compute times.
pub fn latency_profile(trace: &SimulationTrace) -> Result<LatencyStats, MetricsError> {
    if trace.rows.is_empty() {
        return Err(MetricsError::EmptyTrace);
    }
    let mut times: Vec<f64> = trace.rows.iter().map(|r| r.step_time_s * 1e3).collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = times.len();
    let rank = |q: f64| times[(((q * n as f64).ceil() as usize).max(1) - 1).min(n - 1)];
    Ok(LatencyStats {
        mean_ms: times.iter().sum::<f64>() / n as f64,
        min_ms: times[0],
        p50_ms: rank(0.50),
        p99_ms: rank(0.99),
        max_ms: times[n - 1],
    })
}

/// 95% band of the chi-squared distribution with 4 degrees of freedom.
pub const CHI2_4_LOWER_95: f64 = 0.484419;
pub const CHI2_4_UPPER_95: f64 = 11.143287;

/// Normalized estimation error squared per tick, using the stored covariance
/// diagonal: `sum_i (err_i)^2 / P_ii` over the four state components.
pub fn nees_series(trace: &SimulationTrace) -> Vec<f64> {
    trace
        .rows
        .iter()
        .map(|r| {
            let e = [
                r.est_x - r.truth_x,
                r.est_y - r.truth_y,
                r.est_vx - r.truth_vx,
                r.est_vy - r.truth_vy,
            ];
            let p = [r.p_xx, r.p_yy, r.p_vxvx, r.p_vyvy];
            e.iter()
                .zip(&p)
                .map(|(e, p)| if *p > 0.0 { e * e / p } else { 0.0 })
                .sum()
        })
        .collect()
}

/// Averages the NEES series over non-overlapping windows.
pub fn nees_windows(trace: &SimulationTrace, window_ticks: usize) -> Vec<f64> {
    let series = nees_series(trace);
    series
        .chunks(window_ticks)
        .filter(|c| c.len() == window_ticks)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct VariantRow {
    pub variant: VariantSpec,
    pub mean_rmse_cm: f64,
    pub std_rmse_cm: f64,
    pub rmse_by_seed: Vec<(u64, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonTable {
    pub seeds: Vec<u64>,
    pub rows: Vec<VariantRow>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Runs each variant over the same set of derived seeds (identical truth and
/// sensor-noise streams per seed) and reports mean RMSE with spread.
pub fn compare_variants(
    scenario: &Scenario,
    variants: &[VariantSpec],
    n_seeds: usize,
) -> Result<ComparisonTable, MetricsError> {
    if variants.len() < 2 {
        return Err(MetricsError::Invalid(
            "comparison needs at least 2 variants".into(),
        ));
    }
    if n_seeds < 3 {
        return Err(MetricsError::Invalid(
            "comparison needs at least 3 seeds".into(),
        ));
    }
    let seeds: Vec<u64> = (0..n_seeds)
        .map(|i| scenario.seed.wrapping_add(i as u64))
        .collect();

    let jobs: Vec<(usize, u64)> = variants
        .iter()
        .enumerate()
        .flat_map(|(vi, _)| seeds.iter().map(move |s| (vi, *s)))
        .collect();
    let results: Vec<(usize, u64, f64)> = jobs
        .into_par_iter()
        .map(|(vi, seed)| {
            let out = run_with(
                scenario,
                RunOptions {
                    variant: Some(variants[vi]),
                    seed_override: Some(seed),
                    ..Default::default()
                },
            )?;
            Ok::<_, MetricsError>((vi, seed, rmse_cm(&out.trace)?))
        })
        .collect::<Result<_, _>>()?;

    let rows = variants
        .iter()
        .enumerate()
        .map(|(vi, variant)| {
            let rmse_by_seed: Vec<(u64, f64)> = seeds
                .iter()
                .map(|s| {
                    let r = results
                        .iter()
                        .find(|(i, seed, _)| *i == vi && seed == s)
                        .expect("every job produced a result");
                    (*s, r.2)
                })
                .collect();
            let values: Vec<f64> = rmse_by_seed.iter().map(|(_, v)| *v).collect();
            let (mean_rmse_cm, std_rmse_cm) = mean_std(&values);
            VariantRow {
                variant: *variant,
                mean_rmse_cm,
                std_rmse_cm,
                rmse_by_seed,
            }
        })
        .collect();
    Ok(ComparisonTable { seeds, rows })
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepCell {
    pub f_uwb: f64,
    pub f_radar: f64,
    pub mean_rmse_cm: f64,
    pub std_rmse_cm: f64,
    pub mean_power_w: f64,
    pub rmse_by_seed: Vec<(u64, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepSurface {
    pub seeds: Vec<u64>,
    pub cells: Vec<SweepCell>,
}

/// Runs the scenario at every fixed `(f_uwb, f_radar)` grid point, adaptation
/// disabled, with the same derived seeds in every cell.
pub fn frequency_sweep(
    scenario: &Scenario,
    f_uwb_grid: &[f64],
    f_radar_grid: &[f64],
    n_seeds: usize,
) -> Result<SweepSurface, MetricsError> {
    if f_uwb_grid.is_empty() || f_radar_grid.is_empty() {
        return Err(MetricsError::Invalid("sweep grids must be non-empty".into()));
    }
    if n_seeds == 0 {
        return Err(MetricsError::Invalid("sweep needs at least 1 seed".into()));
    }
    for &f in f_uwb_grid {
        if f < scenario.power.uwb_range[0] || f > scenario.power.uwb_range[1] {
            return Err(MetricsError::Invalid(format!(
                "uwb frequency {f} Hz outside supported range"
            )));
        }
    }
    for &f in f_radar_grid {
        if f < scenario.power.radar_range[0] || f > scenario.power.radar_range[1] {
            return Err(MetricsError::Invalid(format!(
                "radar frequency {f} Hz outside supported range"
            )));
        }
    }
    let seeds: Vec<u64> = (0..n_seeds)
        .map(|i| scenario.seed.wrapping_add(i as u64))
        .collect();
    let grid: Vec<(f64, f64)> = f_uwb_grid
        .iter()
        .flat_map(|fu| f_radar_grid.iter().map(move |fr| (*fu, *fr)))
        .collect();

    let cells: Vec<SweepCell> = grid
        .par_iter()
        .map(|&(f_uwb, f_radar)| {
            let mut rmse_by_seed = Vec::with_capacity(seeds.len());
            let mut power_sum = 0.0;
            for &seed in &seeds {
                let out = run_with(
                    scenario,
                    RunOptions {
                        rate_override: Some((f_uwb, f_radar)),
                        seed_override: Some(seed),
                        ..Default::default()
                    },
                )?;
                power_sum += out.trace.rows.iter().map(|r| r.power_w).sum::<f64>()
                    / out.trace.rows.len() as f64;
                rmse_by_seed.push((seed, rmse_cm(&out.trace)?));
            }
            let values: Vec<f64> = rmse_by_seed.iter().map(|(_, v)| *v).collect();
            let (mean_rmse_cm, std_rmse_cm) = mean_std(&values);
            Ok::<_, MetricsError>(SweepCell {
                f_uwb,
                f_radar,
                mean_rmse_cm,
                std_rmse_cm,
                mean_power_w: power_sum / seeds.len() as f64,
                rmse_by_seed,
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(SweepSurface { seeds, cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Environment, EnvironmentId};
    use crate::filter::FusionWeights;
    use crate::power::PowerModel;
    use crate::scenario::{run_scenario, AsaSettings, TraceRow};
    use crate::sensors::NoiseConfig;
    use crate::track::{SpeedProfile, TrackProfile};

    fn tiny_scenario() -> Scenario {
        Scenario {
            seed: 11,
            duration_s: 7.0,
            track: TrackProfile::Straight { length_m: 4.0 },
            speed: SpeedProfile::from_kmph(4.0),
            environment: Environment::preset(
                EnvironmentId::E1,
                &TrackProfile::Straight { length_m: 4.0 },
            ),
            noise: NoiseConfig::default(),
            weights: FusionWeights {
                alpha_x: 0.7,
                alpha_y: 0.7,
                beta_x: 0.4,
                beta_y: 0.4,
            },
            asa: AsaSettings::default(),
            power: PowerModel::default(),
        }
    }

    fn synthetic_trace(rows: Vec<TraceRow>) -> SimulationTrace {
        SimulationTrace {
            dt_s: 1e-3,
            seed: 0,
            variant: VariantSpec::Feel,
            rows,
        }
    }

    fn blank_row(t: f64) -> TraceRow {
        TraceRow {
            t,
            truth_x: 0.0,
            truth_y: 0.0,
            truth_vx: 0.0,
            truth_vy: 0.0,
            est_x: 0.0,
            est_y: 0.0,
            est_vx: 0.0,
            est_vy: 0.0,
            p_xx: 1.0,
            p_yy: 1.0,
            p_vxvx: 1.0,
            p_vyvy: 1.0,
            f_uwb: 10.0,
            f_radar: 130.0,
            power_w: 2.60289,
            step_time_s: 1e-6,
        }
    }

    #[test]
    fn rmse_of_perfect_estimate_is_zero() {
        let trace = synthetic_trace(vec![blank_row(0.001); 10]);
        assert_eq!(rmse_cm(&trace).unwrap(), 0.0);
    }

    #[test]
    fn rmse_constant_offset_is_pythagorean() {
        let mut rows = vec![blank_row(0.001); 10];
        for r in &mut rows {
            r.est_x = 0.03;
            r.est_y = 0.04;
        }
        let trace = synthetic_trace(rows);
        assert!((rmse_cm(&trace).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn rmse_rejects_empty_trace() {
        let trace = synthetic_trace(vec![]);
        assert!(matches!(rmse_cm(&trace), Err(MetricsError::EmptyTrace)));
    }

    #[test]
    fn zero_measurement_noise_tracks_truth_under_a_centimeter() {
        let mut s = tiny_scenario();
        s.noise.uwb = [0.0; 4];
        s.noise.radar = [0.0; 4];
        let trace = run_scenario(&s).unwrap();
        assert!(rmse_cm(&trace).unwrap() < 1.0);
    }

    #[test]
    fn latency_profile_of_uniform_times() {
        let mut rows = vec![blank_row(0.001); 100];
        for r in &mut rows {
            r.step_time_s = 1e-6;
        }
        let stats = latency_profile(&synthetic_trace(rows)).unwrap();
        assert!((stats.mean_ms - 0.001).abs() < 1e-12);
        assert!(stats.p99_ms >= stats.p50_ms);
        assert!(stats.min_ms <= stats.p50_ms && stats.p50_ms <= stats.max_ms);
    }

    #[test]
    fn nees_zero_for_perfect_estimates() {
        let trace = synthetic_trace(vec![blank_row(0.001); 10]);
        assert!(nees_series(&trace).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn nees_detects_overconservative_covariance() {
        let mut rows = vec![blank_row(0.001); 2000];
        for r in &mut rows {
            r.est_x = 0.1; // 10 cm error with P_xx inflated to 100 m^2
            r.p_xx = 100.0;
            r.p_yy = 100.0;
            r.p_vxvx = 100.0;
            r.p_vyvy = 100.0;
        }
        let windows = nees_windows(&synthetic_trace(rows), 1000);
        assert_eq!(windows.len(), 2);
        assert!(windows.iter().all(|w| *w < CHI2_4_LOWER_95));
    }

    // Monte-Carlo filter consistency: windowed NEES stays inside the 95%
    // chi-squared band for nearly all windows.
    #[test]
    fn nees_windows_stay_in_band() {
        let mut in_band = 0usize;
        let mut total = 0usize;
        for i in 0..20u64 {
            let mut s = tiny_scenario();
            s.seed = 100 + i;
            let trace = run_scenario(&s).unwrap();
            for w in nees_windows(&trace, 1000) {
                total += 1;
                if (CHI2_4_LOWER_95..=CHI2_4_UPPER_95).contains(&w) {
                    in_band += 1;
                }
            }
        }
        assert!(total >= 100);
        assert!(
            in_band as f64 >= 0.9 * total as f64,
            "{in_band}/{total} windows in the chi-squared band"
        );
    }

    #[test]
    fn compare_requires_two_variants_and_three_seeds() {
        let s = tiny_scenario();
        assert!(compare_variants(&s, &[VariantSpec::Feel], 3).is_err());
        assert!(compare_variants(&s, &[VariantSpec::Feel, VariantSpec::ImuOnly], 2).is_err());
    }

    #[test]
    fn feel_beats_dead_reckoning() {
        let s = tiny_scenario();
        let table = compare_variants(&s, &[VariantSpec::Feel, VariantSpec::ImuOnly], 3).unwrap();
        assert!(table.rows[0].mean_rmse_cm < table.rows[1].mean_rmse_cm);
    }

    #[test]
    fn comparison_is_deterministic() {
        let s = tiny_scenario();
        let a = compare_variants(&s, &[VariantSpec::Feel, VariantSpec::ImuUwb], 3).unwrap();
        let b = compare_variants(&s, &[VariantSpec::Feel, VariantSpec::ImuUwb], 3).unwrap();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.mean_rmse_cm.to_bits(), rb.mean_rmse_cm.to_bits());
        }
    }

    #[test]
    fn single_cell_sweep_matches_plain_run() {
        let s = tiny_scenario();
        let surface = frequency_sweep(&s, &[10.0], &[130.0], 1).unwrap();
        let out = run_with(
            &s,
            RunOptions {
                rate_override: Some((10.0, 130.0)),
                seed_override: Some(s.seed),
                ..Default::default()
            },
        )
        .unwrap();
        let direct = rmse_cm(&out.trace).unwrap();
        assert_eq!(surface.cells[0].mean_rmse_cm.to_bits(), direct.to_bits());
        assert!((surface.cells[0].mean_power_w - 2.60289).abs() < 1e-9);
    }

    // Mean RMSE is non-increasing in each frequency axis, within one
    // standard error of the paired-seed means.
    #[test]
    fn sweep_rmse_is_monotone_within_noise() {
        let s = tiny_scenario();
        let n = 10;
        let surface = frequency_sweep(&s, &[7.0, 10.0], &[16.0, 130.0], n).unwrap();
        let cell = |fu: f64, fr: f64| {
            surface
                .cells
                .iter()
                .find(|c| c.f_uwb == fu && c.f_radar == fr)
                .unwrap()
        };
        let se = |c: &SweepCell| c.std_rmse_cm / (n as f64).sqrt();
        for (lo, hi) in [
            (cell(10.0, 16.0), cell(10.0, 130.0)),
            (cell(7.0, 130.0), cell(10.0, 130.0)),
            (cell(7.0, 16.0), cell(7.0, 130.0)),
        ] {
            assert!(
                hi.mean_rmse_cm <= lo.mean_rmse_cm + se(lo) + se(hi),
                "rmse rose with frequency: ({}, {}) {:.2} cm -> ({}, {}) {:.2} cm",
                lo.f_uwb,
                lo.f_radar,
                lo.mean_rmse_cm,
                hi.f_uwb,
                hi.f_radar,
                hi.mean_rmse_cm
            );
        }
        // And power is monotone exactly.
        assert!(cell(7.0, 16.0).mean_power_w < cell(10.0, 130.0).mean_power_w);
    }

    #[test]
    fn sweep_rejects_out_of_range_grid() {
        let s = tiny_scenario();
        assert!(frequency_sweep(&s, &[10.0], &[200.0], 1).is_err());
        assert!(frequency_sweep(&s, &[0.5], &[130.0], 1).is_err());
    }
}
