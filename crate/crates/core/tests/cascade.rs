use std::net::TcpStream;
use std::sync::Arc;

use bandseek::orchestrator::{
    run, CascadePlan, DetectorRegistry, Edge, ExternalDetector, ExternalRecord, Mode,
    OracleDetector, OracleParams, RecognitionResult, CLASS_CAR, CLASS_PLATE,
};
use bandseek::provider::{spawn, Client, ImageStore, ServerConfig, ServerHandle, SynthStore};
use bandseek::synth::{layout_scene, Annotation, Difficulty, ObjectKind, SceneSpec};
use bandseek::{BBox, SubEstimate};

fn one_car_spec() -> SceneSpec {
    SceneSpec {
        cars_per_image: (1, 1),
        car_long_edge: (1400, 1600),
        ..SceneSpec::default()
    }
}

struct Rig {
    server: ServerHandle,
    annotations: Vec<Annotation>,
    store: Arc<SynthStore>,
}

impl Rig {
    fn new(spec: SceneSpec, indices: &[u32]) -> Self {
        let store = Arc::new(SynthStore::new(spec.clone(), indices.iter().copied()).unwrap());
        let annotations = indices
            .iter()
            .flat_map(|&i| layout_scene(&spec, i).unwrap().annotations())
            .collect();
        let server = spawn(
            store.clone() as Arc<dyn ImageStore>,
            "127.0.0.1:0",
            ServerConfig::default(),
        )
        .unwrap();
        Self {
            server,
            annotations,
            store,
        }
    }

    fn oracle(&self, params: OracleParams) -> DetectorRegistry {
        let mut reg = DetectorRegistry::new();
        reg.register(
            "oracle",
            Arc::new(OracleDetector::new(params, self.annotations.clone()).unwrap()),
        );
        reg
    }

    fn client(&self) -> Client<TcpStream> {
        Client::connect(self.server.local_addr()).unwrap()
    }

    fn plate_of(&self, image_id: &str) -> Vec<&Annotation> {
        self.annotations
            .iter()
            .filter(|a| a.image_id == image_id && a.object_kind == ObjectKind::Plate)
            .collect()
    }
}

fn quiet() -> OracleParams {
    OracleParams {
        fp_rate: 0.0,
        ..OracleParams::default()
    }
}

fn tags(r: &RecognitionResult) -> Vec<&str> {
    r.ledger.entries.iter().map(|e| e.stage.as_str()).collect()
}

fn assert_boxes_sane(r: &RecognitionResult) {
    let extent = BBox::new(0.0, 0.0, r.image_width as f64, r.image_height as f64);
    for o in &r.objects {
        for b in [o.car, o.plate].into_iter().flatten() {
            assert!(
                extent.contains_eps(&b.bbox, 1e-9),
                "{b:?} outside the image"
            );
        }
        if let (Some(car), Some(plate)) = (o.car, o.plate) {
            assert!(
                car.bbox.contains_eps(&plate.bbox, 1e-9),
                "plate {plate:?} not inside car {car:?}"
            );
        }
    }
}

#[test]
fn recursive_reads_an_easy_car() {
    let rig = Rig::new(one_car_spec(), &[0]);
    let gt = rig.plate_of("scene_0");
    assert_eq!(gt.len(), 1);
    assert_eq!(gt[0].difficulty, Difficulty::Easy);

    let reg = rig.oracle(quiet());
    let r = run(
        &CascadePlan::recursive("oracle"),
        &reg,
        "scene_0",
        &mut rig.client(),
    )
    .unwrap();
    assert_eq!(tags(&r), ["overview", "car", "plate"]);
    assert_eq!(r.objects.len(), 1);
    assert_eq!(r.objects[0].text.as_deref(), gt[0].text.as_deref());
    assert_eq!(
        (r.ledger.entries[0].width, r.ledger.entries[0].height),
        (500, 375)
    );
    assert_eq!(
        r.ledger.entries[1].width.max(r.ledger.entries[1].height),
        300
    );
    assert_boxes_sane(&r);
}

#[test]
fn multistage_reads_an_easy_car() {
    let rig = Rig::new(one_car_spec(), &[0]);
    let gt = rig.plate_of("scene_0");
    let reg = rig.oracle(quiet());
    let r = run(
        &CascadePlan::multistage("oracle"),
        &reg,
        "scene_0",
        &mut rig.client(),
    )
    .unwrap();
    assert_eq!(tags(&r), ["overview", "plate_estimate", "plate"]);
    assert_eq!(r.ledger.entries[0].width, 600);
    assert_eq!(r.objects[0].text.as_deref(), gt[0].text.as_deref());
    assert_boxes_sane(&r);
}

#[test]
fn single_stage_reads_an_easy_plate() {
    let rig = Rig::new(one_car_spec(), &[0]);
    let gt = rig.plate_of("scene_0");
    let reg = rig.oracle(quiet());
    let r = run(
        &CascadePlan::single_stage("oracle"),
        &reg,
        "scene_0",
        &mut rig.client(),
    )
    .unwrap();
    assert_eq!(tags(&r), ["overview", "plate"]);
    assert!(r.objects[0].car.is_none());
    assert_eq!(r.objects[0].text.as_deref(), gt[0].text.as_deref());
}

#[test]
fn empty_scene_costs_one_overview() {
    let spec = SceneSpec {
        cars_per_image: (0, 0),
        ..SceneSpec::default()
    };
    let rig = Rig::new(spec, &[3]);
    let reg = rig.oracle(quiet());
    for mode in [Mode::Recursive, Mode::Multistage, Mode::SingleStage] {
        let r = run(
            &CascadePlan::for_mode(mode, "oracle"),
            &reg,
            "scene_3",
            &mut rig.client(),
        )
        .unwrap();
        assert!(r.objects.is_empty());
        assert_eq!(tags(&r), ["overview"]);
    }
}

#[test]
fn ledger_structure_and_containment_on_default_scenes() {
    let indices: Vec<u32> = (200..206).collect();
    let rig = Rig::new(SceneSpec::default(), &indices);
    let reg = rig.oracle(OracleParams::default());
    let mut client = rig.client();
    for id in rig.store.ids() {
        let r = run(&CascadePlan::recursive("oracle"), &reg, &id, &mut client).unwrap();
        let cars = r.objects.len();
        let plates = r.plates().count();
        assert_eq!(r.ledger.len(), 1 + cars + plates, "{id}");
        assert_eq!(r.ledger.stage("car").count(), cars);
        assert_boxes_sane(&r);

        let m = run(&CascadePlan::multistage("oracle"), &reg, &id, &mut client).unwrap();
        let requested = m.ledger.stage("plate_estimate").count();
        assert_eq!(m.ledger.len(), 1 + requested + m.plates().count(), "{id}");
        assert_boxes_sane(&m);
    }
}

#[test]
fn runs_are_deterministic_across_sessions() {
    let rig = Rig::new(SceneSpec::default(), &[201, 202]);
    let reg = rig.oracle(OracleParams::default());
    for mode in [Mode::Recursive, Mode::Multistage, Mode::SingleStage] {
        let plan = CascadePlan::for_mode(mode, "oracle");
        let once = |id: &str| {
            serde_json::to_string(&run(&plan, &reg, id, &mut rig.client()).unwrap()).unwrap()
        };
        for id in ["scene_201", "scene_202"] {
            assert_eq!(once(id), once(id));
        }
    }
}

#[test]
fn confident_estimate_is_requested_as_is() {
    let rig = Rig::new(one_car_spec(), &[0]);
    let car = rig
        .annotations
        .iter()
        .find(|a| a.object_kind == ObjectKind::Car)
        .unwrap()
        .clone();
    let plate = rig.plate_of("scene_0")[0].clone();
    // integer-aligned estimate so the covering pixel rect is the box itself
    let est = BBox::new(
        plate.bbox.x.floor(),
        plate.bbox.y.floor(),
        plate.bbox.w.ceil() + 1.0,
        plate.bbox.h.ceil() + 1.0,
    );
    let mut reg = DetectorRegistry::new();
    reg.register(
        "ext",
        Arc::new(ExternalDetector::new([
            ExternalRecord {
                image_id: "scene_0".into(),
                stage: None,
                class_id: CLASS_CAR,
                bbox: car.bbox,
                score: 0.9,
                sub_estimate: Some(SubEstimate {
                    bbox: est,
                    score: 1.0,
                }),
            },
            ExternalRecord {
                image_id: "scene_0".into(),
                stage: None,
                class_id: CLASS_PLATE,
                bbox: plate.bbox,
                score: 0.9,
                sub_estimate: None,
            },
        ])),
    );
    let mut plan = CascadePlan::multistage("ext");
    plan.stages[1].max_edge = 10_000;
    let r = run(&plan, &reg, "scene_0", &mut rig.client()).unwrap();
    let e = r.ledger.stage("plate_estimate").next().unwrap();
    assert_eq!((e.width as f64, e.height as f64), (est.w, est.h));
    assert_eq!(r.plates().count(), 1);
    assert_eq!(r.objects[0].text, plate.text);
}

#[test]
fn bad_plans_are_rejected() {
    let rig = Rig::new(one_car_spec(), &[0]);
    let reg = rig.oracle(quiet());
    let mut client = rig.client();
    let missing = CascadePlan::recursive("nope");
    assert!(matches!(
        run(&missing, &reg, "scene_0", &mut client),
        Err(bandseek::Error::UnknownDetector(_))
    ));
    let plan = CascadePlan::recursive("oracle");
    assert!(bandseek::orchestrator::run_multistage(&plan, &reg, "scene_0", &mut client).is_err());
    assert!(matches!(
        run(&plan, &reg, "scene_404", &mut client),
        Err(bandseek::Error::Remote { .. })
    ));
    // the session survives a failed request
    let mut p = CascadePlan::recursive("oracle");
    p.ocr_max_edge = Edge::Px(64);
    assert!(run(&p, &reg, "scene_0", &mut client).is_ok());
}

#[test]
fn every_image_byte_on_the_channel_is_in_some_ledger() {
    let indices: Vec<u32> = (200..203).collect();
    let rig = Rig::new(SceneSpec::default(), &indices);
    let reg = rig.oracle(OracleParams::default());
    let mut client = rig.client();
    let mut ledger_bytes = 0;
    for id in rig.store.ids() {
        for mode in [Mode::Recursive, Mode::Multistage, Mode::SingleStage] {
            let r = run(
                &CascadePlan::for_mode(mode, "oracle"),
                &reg,
                &id,
                &mut client,
            )
            .unwrap();
            ledger_bytes += r.ledger.total_wire_bytes();
        }
    }
    assert_eq!(client.image_frame_bytes(), ledger_bytes);
    assert_eq!(
        client.channel_bytes(),
        ledger_bytes + client.other_frame_bytes()
    );
}
