use std::io::Write;

use serde::Serialize;

use super::{ControlSchedule, ErrorModel};
use crate::error::{Error, Result};

pub const PULSE_CSV_HEADER: &str = "t_s,omega0_rad_s,omega1_rad_s,phi0_rad,phi1_rad,delta_rad_s";

/// Amplitudes and phases of the |0⟩↔|e⟩ and |1⟩↔|e⟩ tones.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ToneParams {
    pub omega0: f64,
    pub omega1: f64,
    pub phi0: f64,
    pub phi1: f64,
    pub delta: f64,
}

/// Folds the counterdiabatic term into the two physical tones.
///
/// The |b⟩–|e⟩ coupling `(Ω/2 + iφ̇) e^{iψ}` has magnitude `Ω_eff/2` with
/// `Ω_eff = 2√((Ω/2)² + φ̇²)` and phase `ψ + atan2(2φ̇, Ω)`; it is split over
/// the tones by the bright-state angle and azimuth.
pub fn raw_tone_params(
    schedule: &dyn ControlSchedule,
    t: f64,
    err: &ErrorModel,
) -> Result<ToneParams> {
    let d = schedule.drive_at(t, err)?;
    let frame = schedule.bright_frame();
    let omega_eff = 2.0 * (0.25 * d.omega * d.omega + d.mixing_rate * d.mixing_rate).sqrt();
    let common = d.coupling_phase() + (2.0 * d.mixing_rate).atan2(d.omega);
    let (s, c) = (0.5 * frame.theta()).sin_cos();
    Ok(ToneParams {
        omega0: omega_eff * s,
        omega1: omega_eff * c,
        phi0: common + frame.phi_rel(),
        phi1: common,
        delta: d.delta,
    })
}

/// Writes the tone waveform on a uniform grid of `samples` points spanning `[0, T]`.
pub fn export_pulses<W: Write>(
    schedule: &dyn ControlSchedule,
    err: &ErrorModel,
    samples: usize,
    out: W,
) -> Result<()> {
    if samples < 2 {
        return Err(Error::invalid("pulse export needs at least two samples"));
    }
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(PULSE_CSV_HEADER.split(','))?;
    let duration = schedule.duration();
    for k in 0..samples {
        let t = if k + 1 == samples {
            duration
        } else {
            duration * k as f64 / (samples - 1) as f64
        };
        let p = raw_tone_params(schedule, t, err)?;
        wtr.write_record(&[
            format!("{t:e}"),
            format!("{:e}", p.omega0),
            format!("{:e}", p.omega1),
            format!("{:e}", p.phi0),
            format!("{:e}", p.phi1),
            format!("{:e}", p.delta),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{hamiltonian_at, HamiltonianKind};
    use crate::linalg::{CMatrix, C64, ZERO};
    use crate::schedule::{default_omega_a, GateSpec, StaSchedule};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{PI, SQRT_2};

    fn sta(theta: f64, phi: f64) -> StaSchedule {
        let g = GateSpec::new(theta, phi, PI).unwrap();
        StaSchedule::new(g, default_omega_a(), 0.5e-6).unwrap()
    }

    #[test]
    fn z_gate_drives_only_the_ground_tone() {
        let s = sta(PI, 0.0);
        for k in 0..=50 {
            let t = s.duration() * k as f64 / 50.0;
            let p = raw_tone_params(&s, t, &ErrorModel::none()).unwrap();
            assert!(p.omega1.abs() < 1e-9 * p.omega0.abs().max(1.0));
        }
    }

    #[test]
    fn balanced_split_at_quarter_period() {
        let s = sta(PI / 2.0, 0.0);
        let t = s.duration();
        let oa = s.omega_a();
        let p = raw_tone_params(&s, 0.25 * t, &ErrorModel::none()).unwrap();
        let omega_eff = 2.0 * ((0.5 * oa).powi(2) + (PI / t).powi(2)).sqrt();
        assert_abs_diff_eq!(p.omega0, omega_eff / SQRT_2, epsilon = 1e-6);
        assert_abs_diff_eq!(p.omega1, omega_eff / SQRT_2, epsilon = 1e-6);
    }

    #[test]
    fn tones_rebuild_the_sta_hamiltonian() {
        let s = sta(1.2, 0.8);
        let err = ErrorModel::new(0.07).unwrap();
        for k in 0..=40 {
            let t = s.duration() * k as f64 / 40.0;
            let p = raw_tone_params(&s, t, &err).unwrap();
            let omega = (p.omega0 * p.omega0 + p.omega1 * p.omega1).sqrt();
            let d = s.drive_at(t, &err).unwrap();
            let omega_eff = (d.omega.powi(2) + 4.0 * d.mixing_rate.powi(2)).sqrt();
            assert_abs_diff_eq!(omega, omega_eff, epsilon = 1e-6);

            let c0 = C64::from_polar(0.5 * p.omega0, p.phi0);
            let c1 = C64::from_polar(0.5 * p.omega1, p.phi1);
            let h = CMatrix::from_row_slice(
                3,
                &[
                    ZERO,
                    ZERO,
                    c0,
                    ZERO,
                    ZERO,
                    c1,
                    c0.conj(),
                    c1.conj(),
                    C64::new(p.delta, 0.0),
                ],
            )
            .unwrap();
            let reference = hamiltonian_at(HamiltonianKind::Sta, &s.bright_frame(), &d);
            assert!(h.max_abs_diff(&reference) < 1e-6);
        }
    }

    #[test]
    fn csv_export_shape() {
        let s = sta(PI / 2.0, 0.0);
        let mut buf = Vec::new();
        export_pulses(&s, &ErrorModel::none(), 1000, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), PULSE_CSV_HEADER);
        let rows: Vec<_> = lines.collect();
        assert_eq!(rows.len(), 1000);
        let last_t: f64 = rows[999].split(',').next().unwrap().parse().unwrap();
        assert_eq!(last_t, s.duration());
    }
}
