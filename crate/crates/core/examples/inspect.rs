use tfp_core::{ArchSpec, FlopPath, SubnetId};

fn main() {
    for spec in [ArchSpec::tfp(), ArchSpec::tfp_l()] {
        print!("{}: params {}", spec.variant, spec.param_count());
        for id in SubnetId::ALL {
            print!(" {}={}", id.name(), spec.subnet_param_count(id));
        }
        println!();
        for (h, w) in [(256, 256), (512, 512), (2160, 3840)] {
            let full = spec.count_flops(h, w, FlopPath::Full).unwrap();
            let pre = spec.count_flops(h, w, FlopPath::Preset).unwrap();
            println!(
                "  {h}x{w}: full {} preset {} ratio {:.4}",
                full.total,
                pre.total,
                full.total as f64 / pre.total as f64
            );
        }
    }
}
