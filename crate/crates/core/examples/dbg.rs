use sner_core::dataset::IndexSet;
use sner_core::group_ner::*;
use sner_core::rng::CounterRng;

fn separable(seed: u64, n: usize, l: usize, informative: usize) -> LabeledDataset {
    let mut rng = CounterRng::new(seed);
    let labels: Vec<usize> = (0..n).map(|i| 1 + i % 2).collect();
    let rows: Vec<Vec<f64>> = (0..l)
        .map(|j| {
            (0..n)
                .map(|i| {
                    let noise = rng.next_normal();
                    if j < informative {
                        let sign = if labels[i] == 1 { 1.0 } else { -1.0 };
                        sign * 2.0 + noise
                    } else {
                        noise
                    }
                })
                .collect()
        })
        .collect();
    LabeledDataset::new(rows, labels, 2).unwrap()
}

fn main() {
    // chi2 round trip profile
    let mut worst = (0.0f64, 0.0f64);
    for i in 0..=40000 {
        let u = i as f64 * 0.001;
        let p = sner_core::numerics::chi2_1_cdf(u).unwrap();
        if p >= 1.0 { continue; }
        let back = sner_core::numerics::chi2_1_inv_cdf(p).unwrap();
        let rel = (back - u).abs() / u.max(1.0);
        if rel > worst.1 { worst = (u, rel); }
    }
    println!("chi2 rt worst rel: {:e} at u={}", worst.1, worst.0);

    let data = separable(11, 80, 30, 5);
    let all = IndexSet::new((0..30).collect(), 30).unwrap();
    let model = RidgeModel::train(&data, &all, 1.0).unwrap();
    let sorted = ridge_weight_sort(&model);
    println!("order head: {:?}", &sorted.order[..12]);
    let config = GroupNerConfig { depth: 3, seed: 1, ..Default::default() };
    let sel = group_ner_select(&data, &sorted, &config).unwrap();
    println!("k_hat={} chosen_c={} acc={} risks={:?} seers={:?}",
        sel.k_hat, sel.chosen_c, sel.validation_accuracy, sel.risks, sel.seers);
    println!("selected: {:?}", sel.selected.to_one_based());
}
