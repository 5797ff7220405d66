use bandseek::baseline::{
    frontier, run_jpeg_grid, write_grid_csv, BaselineConfig, SummaryPoint, DEFAULT_QUALITIES,
};
use bandseek::eval::char_accuracy;
use bandseek::geometry::expand_margin;
use bandseek::orchestrator::ocr_plate;
use bandseek::provider::{ImageStore, MemStore};
use bandseek::raster::{crop, decode, encode, resize_longest_edge, Encoding, EncodingKind};
use bandseek::synth::{generate_scene, Annotation, ObjectKind, SceneSpec};
use bandseek::BBox;

fn small_spec() -> SceneSpec {
    SceneSpec {
        width: 2400,
        height: 1800,
        cars_per_image: (1, 3),
        car_long_edge: (400, 1100),
        ..SceneSpec::default()
    }
}

fn corpus(indices: &[u32]) -> (MemStore, Vec<Annotation>) {
    let mut store = MemStore::new();
    let mut anns = Vec::new();
    for &i in indices {
        let (img, a) = generate_scene(&small_spec(), i).unwrap();
        store.insert(format!("scene_{i}"), img);
        anns.extend(a);
    }
    (store, anns)
}

fn config() -> BaselineConfig {
    BaselineConfig {
        resolutions: vec![300, 600, 1200, 2400],
        qualities: DEFAULT_QUALITIES.to_vec(),
        ocr_padding: 0.15,
    }
}

/// One grid cell recomputed directly: resize, encode, decode, crop each
/// padded plate out of the decoded image, read it.
fn cell(store: &MemStore, anns: &[Annotation], r: u32, q: u8) -> (f64, f64) {
    let (mut bytes, mut acc, mut plates) = (0usize, 0.0, 0usize);
    let ids = store.ids();
    for id in &ids {
        let img = store.load(id).unwrap();
        let small = resize_longest_edge(&img, r);
        let jpeg = encode(&small, Encoding::Jpeg(q)).unwrap();
        bytes += jpeg.len();
        let seen = decode(&jpeg, EncodingKind::Jpeg).unwrap();
        let s = small.width() as f64 / img.width() as f64;
        for p in anns
            .iter()
            .filter(|a| &a.image_id == id && a.object_kind == ObjectKind::Plate)
        {
            let car = anns
                .iter()
                .find(|c| Some(&c.id) == p.parent_id.as_ref())
                .unwrap();
            let region = expand_margin(&p.bbox, 0.15, &car.bbox).unwrap().bbox;
            let r = BBox::new(region.x * s, region.y * s, region.w * s, region.h * s);
            let read = crop(&seen, &r)
                .map(|c| ocr_plate(&c).text)
                .unwrap_or_default();
            acc += char_accuracy(&read, p.text.as_deref().unwrap());
            plates += 1;
        }
    }
    (bytes as f64 / ids.len() as f64, acc / plates as f64)
}

#[test]
fn grid_matches_direct_recomputation_and_is_monotone_in_quality() {
    let (store, anns) = corpus(&[0, 1, 2]);
    let cfg = config();
    let out = run_jpeg_grid(&store, &anns, &cfg).unwrap();
    assert_eq!(out.points.len(), 4 * 8);
    assert_eq!(out.skipped_images, 0);

    for &(r, q) in &[(300, 1), (1200, 25), (2400, 75)] {
        let p = out.point(r, q).unwrap();
        let (bytes, acc) = cell(&store, &anns, r, q);
        assert_eq!(p.mean_bytes, bytes, "r{r} q{q}");
        assert!((p.char_accuracy - acc).abs() < 1e-12, "r{r} q{q}");
    }

    for &r in &cfg.resolutions {
        let row: Vec<f64> = cfg
            .qualities
            .iter()
            .map(|&q| out.point(r, q).unwrap().mean_bytes)
            .collect();
        assert!(
            row.windows(2).all(|w| w[0] <= w[1]),
            "bytes at r{r}: {row:?}"
        );
    }
    for &q in &cfg.qualities {
        let col: Vec<f64> = cfg
            .resolutions
            .iter()
            .map(|&r| out.point(r, q).unwrap().mean_bytes)
            .collect();
        assert!(
            col.windows(2).all(|w| w[0] < w[1]),
            "bytes at q{q}: {col:?}"
        );
    }
    let best = out.best_accuracy().unwrap();
    assert!(best.char_accuracy >= 0.95, "{best:?}");
    assert!(out.point(300, 1).unwrap().char_accuracy < best.char_accuracy);
}

#[test]
fn frontier_lists_grid_then_cascades_in_log_megabytes() {
    let (store, anns) = corpus(&[3]);
    let cfg = BaselineConfig {
        resolutions: vec![600, 2400],
        qualities: vec![10, 75],
        ..BaselineConfig::default()
    };
    let out = run_jpeg_grid(&store, &anns, &cfg).unwrap();
    let cascade = SummaryPoint {
        label: "recursive:wire_bytes".into(),
        mean_cost_bytes: 1e5,
        char_accuracy: 0.9,
    };
    let rows = frontier(&out.points, &[cascade]);
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0].label, "jpeg_r600_q10");
    assert_eq!(rows[4].label, "recursive:wire_bytes");
    assert!((rows[4].log10_megabytes + 1.0).abs() < 1e-12);

    let mut csv = Vec::new();
    write_grid_csv(&out.points, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.starts_with("resolution,quality,images,plates,mean_bytes,char_accuracy"));
}

#[test]
fn plates_without_text_skip_their_image() {
    let (store, mut anns) = corpus(&[4, 5]);
    let victim = anns
        .iter_mut()
        .find(|a| a.image_id == "scene_4" && a.object_kind == ObjectKind::Plate)
        .unwrap();
    victim.text = None;
    let cfg = BaselineConfig {
        resolutions: vec![600],
        qualities: vec![50],
        ..BaselineConfig::default()
    };
    let out = run_jpeg_grid(&store, &anns, &cfg).unwrap();
    assert_eq!(out.skipped_images, 1);
    assert_eq!(out.points[0].images, 1);
}
