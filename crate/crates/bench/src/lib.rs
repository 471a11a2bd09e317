//! Synthetic workload generators shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use beetscan_core::annot::{
    AnnotatedImage, AnnotatedRegion, Lighting, MetaParams, Moisture, Polygon, SemanticClass, Stage,
};
use beetscan_core::geometry::{AxisAlignedBox, OrientedBox};
use beetscan_core::metrics::{DetGeometry, Detection, GroundTruth};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon {
    Polygon::new(vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]]).unwrap()
}

/// A plausible annotated image: a few beets with sub-regions on a
/// moderate canvas.
pub fn demo_image(width: u32, height: u32, beets: u32) -> AnnotatedImage {
    let mut rng = rng(7);
    let mut regions = Vec::new();
    for instance in 0..beets {
        let x0 = rng.random_range(0.0..f64::from(width) * 0.6);
        let y0 = rng.random_range(0.0..f64::from(height) * 0.6);
        let w = rng.random_range(80.0..f64::from(width) * 0.35);
        let h = rng.random_range(60.0..f64::from(height) * 0.35);
        let x1 = (x0 + w).min(f64::from(width));
        let y1 = (y0 + h).min(f64::from(height));
        regions.push(AnnotatedRegion::new(SemanticClass::Beet, rect(x0, y0, x1, y1), instance).unwrap());
        regions.push(
            AnnotatedRegion::new(
                SemanticClass::Soil,
                rect(x0 + w * 0.1, y0 + h * 0.1, x0 + w * 0.4, y0 + h * 0.4),
                instance,
            )
            .unwrap(),
        );
        regions.push(
            AnnotatedRegion::new(
                SemanticClass::Rot,
                rect(x0 + w * 0.5, y0 + h * 0.5, x0 + w * 0.8, y0 + h * 0.8),
                instance,
            )
            .unwrap(),
        );
    }
    AnnotatedImage {
        image_id: "bench".into(),
        path: "bench.png".into(),
        width,
        height,
        group_id: "g".into(),
        meta: MetaParams {
            stage: Stage::Harvest,
            lighting: Lighting::Diffuse,
            moisture: Moisture::Wet,
            location: "C".into(),
            session_id: 6,
        },
        regions,
        markers: Vec::new(),
    }
}

/// Random oriented-box pair with substantial overlap.
pub fn obb_pair(rng: &mut ChaCha8Rng) -> (OrientedBox, OrientedBox) {
    let a = OrientedBox::new(
        [rng.random_range(20.0..80.0), rng.random_range(20.0..80.0)],
        rng.random_range(10.0..40.0),
        rng.random_range(5.0..25.0),
        rng.random_range(0.0..std::f64::consts::PI),
    )
    .unwrap();
    let b = OrientedBox::new(
        [a.center[0] + rng.random_range(-5.0..5.0), a.center[1] + rng.random_range(-5.0..5.0)],
        a.width * rng.random_range(0.8..1.2),
        a.height * rng.random_range(0.8..1.2),
        a.angle + rng.random_range(-0.4..0.4),
    )
    .unwrap();
    (a, b)
}

/// A detection scene with boxes, sized like one evaluation image.
pub fn detection_scene(rng: &mut ChaCha8Rng, gts: usize, dets: usize) -> (Vec<Detection>, Vec<GroundTruth>) {
    let ground_truths: Vec<GroundTruth> = (0..gts)
        .map(|_| {
            let x0 = rng.random_range(0.0..800.0);
            let y0 = rng.random_range(0.0..500.0);
            GroundTruth {
                geometry: DetGeometry::Box(
                    AxisAlignedBox::new(x0, y0, x0 + rng.random_range(40.0..200.0), y0 + rng.random_range(40.0..160.0))
                        .unwrap(),
                ),
                class: "Beet".into(),
            }
        })
        .collect();
    let detections: Vec<Detection> = (0..dets)
        .map(|i| {
            let base = &ground_truths[i % ground_truths.len().max(1)];
            let DetGeometry::Box(b) = &base.geometry else { unreachable!() };
            let dx = rng.random_range(-20.0..20.0);
            let dy = rng.random_range(-20.0..20.0);
            Detection {
                geometry: DetGeometry::Box(
                    AxisAlignedBox::new(b.x_min + dx, b.y_min + dy, b.x_max + dx, b.y_max + dy).unwrap(),
                ),
                class: "Beet".into(),
                score: rng.random_range(0.0..1.0),
            }
        })
        .collect();
    (detections, ground_truths)
}
