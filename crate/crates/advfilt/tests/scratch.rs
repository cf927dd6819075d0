use advfilt::classifier::{train, Classifier, TrainConfig};
use advfilt::modgen::{make_dataset, Dataset, ModClass};

fn report(net: &Classifier, data: &Dataset, tag: &str) {
    let mut line = format!("{tag}: ");
    for k in ModClass::ALL {
        let ex = data.test_of_class(k);
        let c = ex.iter().filter(|(s, kk)| net.classify(s).unwrap() == *kk).count();
        line += &format!("{}={:.3} ", k.label(), c as f64 / ex.len() as f64);
    }
    line += &format!("macro={:.3}", net.accuracy(&data.test()).unwrap());
    println!("{line}");
}

#[test]
#[ignore]
fn scratch_mf_init() {
    let data = make_dataset(&ModClass::ALL, 500, 128, 1).unwrap();
    for epochs in [40usize, 80] {
        for seed in [2u64, 3, 4] {
            let t = std::time::Instant::now();
            let cfg = TrainConfig { epochs, seed, lr_decay: true, ..TrainConfig::default() };
            let net = train(&data, &cfg).unwrap();
            report(&net, &data, &format!("mf-init e={epochs} s{seed} ({:.0?})", t.elapsed()));
        }
    }
}
