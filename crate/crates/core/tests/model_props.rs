use proptest::prelude::*;
use wino_core::engine::{vgg16_spec, LayerSpec};
use wino_core::model::{
    add_counts, energy, model_network, mult_count, stage_table, volumes, weight_dilation,
    AddCountVariant, EnergyParams,
};
use wino_core::transform::make_plan;

fn layer(h: usize, w: usize, c: usize, k: usize) -> LayerSpec {
    LayerSpec {
        w,
        ..LayerSpec::new("l", h, h, c, k)
    }
}

proptest! {
    #[test]
    fn energy_is_linear_in_each_unit(h in 1usize..40, w in 1usize..40, c in 1usize..64,
                                     k in 1usize..64, m in 2usize..5) {
        let plan = make_plan(m, 3).unwrap();
        let l = layer(h, w, c, k);
        let v = volumes(&l, m, 3);
        let a = add_counts(&l, &plan, AddCountVariant::Joint);
        let base = EnergyParams::default();
        let e0 = energy(&l, &plan, &base).unwrap();
        let bump = |f: fn(&mut EnergyParams)| {
            let mut p = base;
            f(&mut p);
            energy(&l, &plan, &p).unwrap() - e0
        };
        // Steps of one unit keep every field's ordering valid.
        prop_assert_eq!(bump(|p| p.e_me += 1.0), v.d_wk as f64);
        prop_assert_eq!(bump(|p| p.e_ml += 1.0), (v.d_wi + v.d_wo) as f64);
        prop_assert_eq!(bump(|p| p.e_mul += 1.0), mult_count(&l, m, 3) as f64);
        prop_assert_eq!(bump(|p| p.e_add += 1.0), (a.s_w + a.s_b + a.s_a) as f64);
    }
}

// The D_wi trend needs the tile count to drop faster than l² grows. That
// holds for VGG16 over m in 2..=4, but not at m=5 to 6 on 14x14 maps (both
// give 3x3 tiles) nor on tiny maps.
#[test]
fn larger_tiles_trade_features_for_weights() {
    for l in vgg16_spec().convs() {
        for m in 2..4 {
            let (a, b) = (volumes(l, m, 3), volumes(l, m + 1, 3));
            assert!(b.d_wk >= a.d_wk, "{} m={m}", l.name);
            assert!(b.d_wi <= a.d_wi, "{} m={m}", l.name);
        }
    }
}

#[test]
fn unit_energies_sum_the_counts() {
    let plan = make_plan(2, 3).unwrap();
    let l = layer(2, 2, 1, 1);
    let ep = EnergyParams {
        e_me: 4.0,
        e_ml: 3.0,
        e_mul: 2.0,
        e_add: 1.0,
    };
    let v = volumes(&l, 2, 3);
    assert_eq!((v.d_wi, v.d_wo, v.d_wk), (16, 16, 16));
    let a = add_counts(&l, &plan, AddCountVariant::Joint);
    assert_eq!(a.s_w, 0);
    let e = energy(&l, &plan, &ep).unwrap();
    assert_eq!(
        e,
        3.0 * 32.0 + 4.0 * 16.0 + 2.0 * 16.0 + (a.s_b + a.s_a) as f64
    );
}

#[test]
fn joint_add_formulas() {
    let plan = make_plan(2, 3).unwrap();
    let a = add_counts(&layer(4, 4, 1, 1), &plan, AddCountVariant::Joint);
    assert_eq!(a.s_b, 128);
    assert_eq!(mult_count(&layer(4, 4, 1, 1), 2, 3), 64);
    assert_eq!(mult_count(&layer(14, 14, 512, 512), 2, 3), 205_520_896);
}

#[test]
fn stage_volumes_of_vgg16() {
    let rows = stage_table(&vgg16_spec(), 2, 3);
    let got: Vec<(&str, usize, u64, u64)> = rows
        .iter()
        .map(|r| (r.stage.as_str(), r.layers, r.d_wi, r.d_wk))
        .collect();
    assert_eq!(
        got,
        [
            ("conv1", 2, 12_845_056, 65_536),
            ("conv2", 3, 6_422_528, 262_144),
            ("conv3", 4, 3_211_264, 1_048_576),
            ("conv4", 4, 1_605_632, 4_194_304),
            ("conv5", 4, 401_408, 4_194_304),
            ("conv6", 1, 131_072, 4_194_304),
        ]
    );
    assert!((weight_dilation(2, 3) - 16.0 / 9.0).abs() < 1e-15);
}

#[test]
fn vgg16_energy_at_two_tile_sizes() {
    let net = vgg16_spec();
    let ep = EnergyParams::default();
    let total = |m, v| {
        model_network(&net, &make_plan(m, 3).unwrap(), &ep, v)
            .unwrap()
            .total
    };
    // With the C·K factor the transform additions dominate and favour m=2;
    // per-operand counts let the smaller multiply count win at m=4.
    let joint = AddCountVariant::Joint;
    let per_operand = AddCountVariant::PerOperand;
    assert!(total(2, joint).e_tot < total(4, joint).e_tot);
    assert!(total(4, per_operand).e_tot < total(2, per_operand).e_tot);
    // Feature-map traffic shrinks with m; weight traffic grows.
    let (v2, v4) = (total(2, joint).volumes, total(4, joint).volumes);
    assert!(v4.d_wi < v2.d_wi && v4.d_wk > v2.d_wk);
}
