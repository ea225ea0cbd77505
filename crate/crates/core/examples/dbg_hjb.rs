use impulse_solve::exact1d;
use impulse_solve::hjb::{value_iteration, HjbConfig};
use impulse_solve::jumpgrid::{build_jump_grid, GridMode, GridSpec, RhoPreset};
use impulse_solve::model::ModelParams;

fn main() {
    let params = ModelParams::one_d_reference();
    let n = 50;
    let spec = GridSpec { n, l_bins: 2 * n, rho: RhoPreset::Sec41.value(n), dt: 2.0 / n as f64, mode: GridMode::OneD };
    let grid = build_jump_grid(&spec, &params).unwrap();
    let field = value_iteration(&spec, &grid, &params, &HjbConfig::default()).unwrap();
    let sol = exact1d::solve_quintet(&params).unwrap();
    println!("iters={} resid={:.3e} x_bar={}", field.iterations, field.final_residual, field.x_bar[0]);
    for i in 0..=n {
        let x = i as f64 / n as f64;
        let ex = exact1d::exact_value(x, &sol);
        let nm = field.phi_at(i, 0);
        if i % 5 == 0 || (nm - ex).abs() > 0.05 {
            println!("i={:3} x={:.3} exact={:.6} numeric={:.6} err={:+.5} eta={}", i, x, ex, nm, nm - ex, field.eta_at(i, 0));
        }
    }
}
