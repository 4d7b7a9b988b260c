//! CSV renderings of the analysis results. Every table has a header row;
//! reals are written in shortest round-trip scientific notation.

use std::fmt::Write as _;

use super::{BoundReport, DecayFit, MeanCurves, MomentEstimates, TrackRecord};

pub const CURVES_HEADER: &str = "k,mse_primal_mean,mse_primal_sem,mse_dual_mean,mse_dual_sem,mse_uG_mean,mse_uG_sem";
pub const MOMENTS_HEADER: &str = "B_x4_hat,B_x4_sem,B_lambda4_hat,B_lambda4_sem,samples";
pub const BOUND_HEADER: &str = "B1,B2,C_hat,gamma_hat,theorem1_rhs,observed_plateau,bound_satisfied";
pub const DECAY_HEADER: &str = "window,mean_product,sem";
pub const CONTRACTION_HEADER: &str = "track,k,delta,q,g,dx_star,dgrad_star,lemma1_lhs,lemma1_rhs,lemma1_slack,lemma1_passed";

pub fn curves_csv(c: &MeanCurves) -> String {
    let mut out = format!("{CURVES_HEADER}\n");
    for k in 0..c.len() {
        let _ = writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{:e},{:e}",
            k + 1,
            c.primal[k].mean,
            c.primal[k].sem,
            c.dual[k].mean,
            c.dual[k].sem,
            c.u_g[k].mean,
            c.u_g[k].sem
        );
    }
    out
}

pub fn moments_csv(m: &MomentEstimates) -> String {
    format!(
        "{MOMENTS_HEADER}\n{:e},{:e},{:e},{:e},{}\n",
        m.b_x4_hat, m.b_x4_sem, m.b_lambda4_hat, m.b_lambda4_sem, m.samples
    )
}

pub fn bound_csv(b: &BoundReport) -> String {
    format!(
        "{BOUND_HEADER}\n{:e},{:e},{:e},{:e},{:e},{:e},{}\n",
        b.b1, b.b2, b.c_hat, b.gamma_hat, b.theorem1_rhs, b.observed_plateau, b.bound_satisfied
    )
}

pub fn decay_csv(fit: &DecayFit) -> String {
    let mut out = format!("{DECAY_HEADER}\n");
    for w in &fit.windows {
        let _ = writeln!(out, "{},{:e},{:e}", w.window, w.mean_product, w.sem);
    }
    out
}

/// Per-step contraction quantities and one-step inequality sides of every track.
pub fn contraction_csv(records: &[TrackRecord]) -> String {
    let mut out = format!("{CONTRACTION_HEADER}\n");
    for (t, r) in records.iter().enumerate() {
        for k in 0..r.len() {
            let c = &r.lemma1[k];
            let _ = writeln!(
                out,
                "{t},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}",
                k + 1,
                r.delta[k],
                r.q[k],
                r.g[k],
                r.dx_star[k],
                r.dgrad_star[k],
                c.lhs,
                c.rhs,
                c.slack,
                c.passed
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::{MeanSem, WindowStat};
    use super::*;

    #[test]
    fn headers_and_rows() {
        let ms = |m| MeanSem { mean: m, sem: 0.5 };
        let curves = MeanCurves {
            primal: vec![ms(1.0), ms(2.0)],
            dual: vec![ms(3.0), ms(4.0)],
            u_g: vec![ms(5.0), ms(6.0)],
            u: vec![ms(7.0), ms(8.0)],
        };
        let text = curves_csv(&curves);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CURVES_HEADER);
        assert_eq!(lines[1], "1,1e0,5e-1,3e0,5e-1,5e0,5e-1");
        assert_eq!(lines.len(), 3);

        let fit = DecayFit {
            c_hat: 1.0,
            gamma_hat: 0.9,
            r_squared: 1.0,
            windows: vec![WindowStat {
                window: 1,
                mean_product: 0.9,
                sem: 0.0,
                count: 3,
            }],
        };
        assert_eq!(decay_csv(&fit), "window,mean_product,sem\n1,9e-1,0e0\n");

        let b = BoundReport {
            b1: 1.0,
            b2: 2.0,
            c_hat: 1.0,
            gamma_hat: 0.5,
            theorem1_rhs: 10.0,
            observed_plateau: 0.1,
            bound_satisfied: true,
        };
        assert_eq!(bound_csv(&b).lines().nth(1).unwrap(), "1e0,2e0,1e0,5e-1,1e1,1e-1,true");
    }
}
