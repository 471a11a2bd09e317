//! Property tests for the geometric and statistical invariants.

use beetscan_core::annot::{
    make_split, AnnotatedImage, Lighting, MarkerAnnotation, MarkerClass, MetaParams, Moisture,
    Polygon, SemanticClass, Stage,
};
use beetscan_core::geometry::{
    aabb_iou, estimate_scale, mask_iou, obb_iou, polygon_area, rasterize_polygon, AxisAlignedBox,
    BinaryMask, MarkerDims, OrientedBox,
};
use beetscan_core::metrics::{confusion, ConfusionTotals};
use beetscan_core::pipeline::{extract_patch, PatchTier};
use beetscan_core::raster::RgbRaster;
use beetscan_core::SemanticMask;
use proptest::prelude::*;

/// Star-shaped simple polygon around a center: sorted angles, random
/// radii.
fn star_polygon(center: [f64; 2], radii: &[f64]) -> Polygon {
    let n = radii.len();
    let vertices: Vec<[f64; 2]> = radii
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let theta = std::f64::consts::TAU * i as f64 / n as f64;
            [center[0] + r * theta.cos(), center[1] + r * theta.sin()]
        })
        .collect();
    Polygon::new(vertices).unwrap()
}

fn rotate(p: [f64; 2], angle: f64) -> [f64; 2] {
    let (sin, cos) = angle.sin_cos();
    [p[0] * cos - p[1] * sin, p[0] * sin + p[1] * cos]
}

proptest! {
    #[test]
    fn polygon_area_invariances(
        radii in prop::collection::vec(1.0f64..30.0, 5..12),
        dx in -50.0f64..50.0,
        dy in -50.0f64..50.0,
        angle in 0.0f64..std::f64::consts::TAU,
        scale in 0.2f64..4.0,
    ) {
        let polygon = star_polygon([0.0, 0.0], &radii);
        let area = polygon_area(&polygon);
        prop_assert!(area > 0.0);

        let reversed = Polygon::new(polygon.vertices().iter().rev().copied().collect()).unwrap();
        prop_assert!((polygon_area(&reversed) - area).abs() < 1e-9);

        let translated = Polygon::new(
            polygon.vertices().iter().map(|v| [v[0] + dx, v[1] + dy]).collect(),
        ).unwrap();
        prop_assert!((polygon_area(&translated) - area).abs() < 1e-6);

        let rotated = Polygon::new(
            polygon.vertices().iter().map(|v| rotate(*v, angle)).collect(),
        ).unwrap();
        prop_assert!((polygon_area(&rotated) - area).abs() < 1e-6);

        let scaled = Polygon::new(
            polygon.vertices().iter().map(|v| [v[0] * scale, v[1] * scale]).collect(),
        ).unwrap();
        prop_assert!((polygon_area(&scaled) - area * scale * scale).abs() < area * scale * scale * 1e-9 + 1e-9);
    }

    #[test]
    fn aabb_iou_properties(
        ax in 0.0f64..50.0, ay in 0.0f64..50.0, aw in 1.0f64..40.0, ah in 1.0f64..40.0,
        bx in 0.0f64..50.0, by in 0.0f64..50.0, bw in 1.0f64..40.0, bh in 1.0f64..40.0,
    ) {
        let a = AxisAlignedBox::new(ax, ay, ax + aw, ay + ah).unwrap();
        let b = AxisAlignedBox::new(bx, by, bx + bw, by + bh).unwrap();
        let iou = aabb_iou(&a, &b);
        prop_assert!((0.0..=1.0).contains(&iou));
        prop_assert!((iou - aabb_iou(&b, &a)).abs() < 1e-15);
        prop_assert_eq!(aabb_iou(&a, &a), 1.0);
        if iou == 1.0 {
            prop_assert_eq!(a.as_array(), b.as_array());
        }
    }

    #[test]
    fn obb_iou_properties(
        cx in 0.0f64..40.0, cy in 0.0f64..40.0,
        w in 2.0f64..30.0, h in 1.0f64..25.0,
        angle in 0.0f64..std::f64::consts::PI,
        dx in -10.0f64..10.0, dy in -10.0f64..10.0,
        dangle in -0.8f64..0.8,
    ) {
        let a = OrientedBox::new([cx, cy], w, h, angle).unwrap();
        let b = OrientedBox::new([cx + dx, cy + dy], w, h, angle + dangle).unwrap();
        let iou = obb_iou(&a, &b);
        prop_assert!((0.0..=1.0).contains(&iou));
        prop_assert!((iou - obb_iou(&b, &a)).abs() < 1e-9);
        prop_assert!((obb_iou(&a, &a) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn obb_iou_reduces_to_aabb_iou_at_angle_zero(
        cx in 0.0f64..40.0, cy in 0.0f64..40.0,
        w in 2.0f64..30.0, h in 1.0f64..25.0,
        dx in -20.0f64..20.0, dy in -20.0f64..20.0,
        w2 in 2.0f64..30.0, h2 in 1.0f64..25.0,
    ) {
        let oa = OrientedBox::new([cx, cy], w, h, 0.0).unwrap();
        let ob = OrientedBox::new([cx + dx, cy + dy], w2, h2, 0.0).unwrap();
        let ra = AxisAlignedBox::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0).unwrap();
        let rb = AxisAlignedBox::new(cx + dx - w2 / 2.0, cy + dy - h2 / 2.0, cx + dx + w2 / 2.0, cy + dy + h2 / 2.0).unwrap();
        prop_assert!((obb_iou(&oa, &ob) - aabb_iou(&ra, &rb)).abs() < 1e-9);
    }

    #[test]
    fn mask_iou_properties(
        ax in 0u32..20, ay in 0u32..20, aw in 1u32..12, ah in 1u32..12,
        bx in 0u32..20, by in 0u32..20, bw in 1u32..12, bh in 1u32..12,
    ) {
        let rect = |x0: u32, y0: u32, w: u32, h: u32| {
            let mut m = BinaryMask::new(32, 32);
            for y in y0..(y0 + h).min(32) {
                for x in x0..(x0 + w).min(32) {
                    m.set(x, y, true);
                }
            }
            m
        };
        let a = rect(ax, ay, aw, ah);
        let b = rect(bx, by, bw, bh);
        let iou = mask_iou(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&iou));
        prop_assert_eq!(iou, mask_iou(&b, &a).unwrap());
        prop_assert_eq!(mask_iou(&a, &a).unwrap(), 1.0);
        if iou == 1.0 {
            prop_assert_eq!(a.data(), b.data());
        }
    }

    #[test]
    fn rasterized_integer_rectangle_counts_are_exact(
        x0 in 0u32..30, y0 in 0u32..30, w in 1u32..20, h in 1u32..20,
    ) {
        let polygon = Polygon::new(vec![
            [f64::from(x0), f64::from(y0)],
            [f64::from(x0 + w), f64::from(y0)],
            [f64::from(x0 + w), f64::from(y0 + h)],
            [f64::from(x0), f64::from(y0 + h)],
        ]).unwrap();
        let mask = rasterize_polygon(polygon.vertices(), 64, 64);
        prop_assert_eq!(mask.count_ones(), u64::from(w * h));
    }

    #[test]
    fn scale_estimate_is_rigid_invariant(
        dx in -100.0f64..100.0, dy in -100.0f64..100.0,
        angle in 0.0f64..std::f64::consts::TAU,
    ) {
        let base = [[0.0, 0.0], [200.0, 0.0], [202.0, 98.0], [-2.0, 102.0]];
        let dims = MarkerDims { length_mm: 100.0, width_mm: 50.0 };
        let reference = estimate_scale(
            &MarkerAnnotation::new(MarkerClass::Sign, base).unwrap(),
            dims,
        ).unwrap();
        let moved = base.map(|p| {
            let r = rotate(p, angle);
            [r[0] + dx, r[1] + dy]
        });
        let moved_scale = estimate_scale(
            &MarkerAnnotation::new(MarkerClass::Sign, moved).unwrap(),
            dims,
        ).unwrap();
        prop_assert!((moved_scale.mm_per_pixel - reference.mm_per_pixel).abs() < 1e-9);
        prop_assert!((moved_scale.residual - reference.residual).abs() < 1e-9);
    }

    #[test]
    fn patch_transform_round_trips_content_pixels(
        x0 in 0.0f64..200.0, y0 in 0.0f64..150.0,
        w in 20.0f64..600.0, h in 20.0f64..400.0,
        margin in 0.0f64..0.2,
        tier in prop::sample::select(vec![PatchTier::Small, PatchTier::Medium, PatchTier::Large]),
    ) {
        let image = RgbRaster::filled(900, 650, [0, 0, 0]);
        let bbox = AxisAlignedBox::new(x0, y0, (x0 + w).min(899.0), (y0 + h).min(649.0)).unwrap();
        let (_, transform) = extract_patch(&image, &bbox, tier.size(), margin).unwrap();
        // pixel centers inside the crop return to within half a source pixel
        for (fx, fy) in [(0.1, 0.1), (0.5, 0.5), (0.9, 0.9)] {
            let x = transform.crop_x + transform.crop_w * fx;
            let y = transform.crop_y + transform.crop_h * fy;
            let [px, py] = transform.forward([x, y]);
            let [bx, by] = transform.inverse([px, py]);
            prop_assert!((bx - x).abs() < 1e-9);
            prop_assert!((by - y).abs() < 1e-9);
            // quantizing to the nearest patch pixel center stays within
            // half an image pixel after scaling back
            let [qx, qy] = transform.inverse([px.floor() + 0.5, py.floor() + 0.5]);
            prop_assert!((qx - x).abs() <= 0.5 / transform.scale + 1e-9);
            prop_assert!((qy - y).abs() <= 0.5 / transform.scale + 1e-9);
        }
    }

    #[test]
    fn split_is_pure_and_respects_groups(
        sizes in prop::collection::vec(1usize..5, 3..25),
        seed in 0u64..1000,
    ) {
        let mut images = Vec::new();
        for (g, size) in sizes.iter().enumerate() {
            for k in 0..*size {
                images.push(AnnotatedImage {
                    image_id: format!("i{g}_{k}"),
                    path: String::new(),
                    width: 8,
                    height: 8,
                    group_id: format!("g{g}"),
                    meta: MetaParams {
                        stage: Stage::Sample,
                        lighting: Lighting::Sunny,
                        moisture: Moisture::Dry,
                        location: "A".into(),
                        session_id: 0,
                    },
                    regions: Vec::new(),
                    markers: Vec::new(),
                });
            }
        }
        let split = make_split(&images, (0.7, 0.15, 0.15), seed).unwrap();
        let again = make_split(&images, (0.7, 0.15, 0.15), seed).unwrap();
        prop_assert_eq!(split.to_json(), again.to_json());

        let total = split.train.len() + split.val.len() + split.test.len();
        prop_assert_eq!(total, images.len());
        for image in &images {
            let sets_containing = [&split.train, &split.val, &split.test]
                .iter()
                .filter(|set| set.contains(&image.image_id))
                .count();
            prop_assert_eq!(sets_containing, 1);
        }
        // group constraint: the group's prefix appears in exactly one set
        for (g, _) in sizes.iter().enumerate() {
            let prefix = format!("i{g}_");
            let in_sets = [&split.train, &split.val, &split.test]
                .iter()
                .filter(|set| set.iter().any(|id| id.starts_with(&prefix)))
                .count();
            prop_assert_eq!(in_sets, 1);
        }
    }

    #[test]
    fn confusion_totals_cover_every_pixel(
        pred in prop::collection::vec(0u8..7, 64),
        gt in prop::collection::vec(0u8..7, 64),
    ) {
        let pred = SemanticMask::from_raw(8, 8, pred).unwrap();
        let gt = SemanticMask::from_raw(8, 8, gt).unwrap();
        let totals: ConfusionTotals = confusion(&pred, &gt, None).unwrap();
        prop_assert_eq!(totals.evaluated_pixels(), 64);
        let fp_sum: u64 = SemanticClass::ALL.iter().map(|c| totals.class(*c).false_pos).sum();
        let fn_sum: u64 = SemanticClass::ALL.iter().map(|c| totals.class(*c).false_neg).sum();
        prop_assert_eq!(fp_sum, fn_sum);
    }
}
