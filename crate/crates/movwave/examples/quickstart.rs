use movwave::energy::energy_report;
use movwave::observability::one_endpoint_identity;
use movwave::*;

fn main() -> Result<()> {
    let g = Geometry64::new(0.1, 0.3, 1.0)?;
    let data = Preset::SineBump { amplitude: 1.0, power: 6, velocity: 0.0 }.build(&g)?;
    let report = compute_coefficients(&extend(&g, &data), 64, &CoefficientOptions::default())?;
    let c = report.coefficients;

    let e = energy_report(&c, 2.0 * g.t0, 512)?;
    println!("t E(t) = {:e}, S = {:e}", e.t_energy(), e.s);

    let obs = one_endpoint_identity(&c, Side::Right, 1, 512)?;
    println!("trace integral {:e} vs {:e}", obs.lhs, obs.rhs);

    let u = c.evaluate(0.0, 3.0)?;
    println!("phi(0, 3) = {:e}", u.phi);
    Ok(())
}
