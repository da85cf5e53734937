use safelayer::prodplan::*;

fn main() {
    let instance = PlanningInstance::generate(11, 400).unwrap();
    for (epochs, lr) in [(60, 0.05), (150, 0.05), (150, 0.15), (300, 0.15), (300, 0.3)] {
        let nets = train_twostage_predictor(&instance, LAG_WINDOW..250, 0.0, epochs, lr, 1).unwrap();
        let mut err = 0.0;
        let mut base = 0.0;
        let mut n = 0;
        for t in 280..380 {
            for p in 0..N_PRODUCTS {
                let o = denorm_estimate(nets[p].forward(&net_input(instance.window(p, t))).unwrap()[0]);
                err += (o - instance.demand[p][t]).abs();
                base += (5.0 - instance.demand[p][t]).abs();
                n += 1;
            }
        }
        println!("epochs {epochs} lr {lr}: err {:.3} baseline {:.3}", err / n as f64, base / n as f64);
    }
}
