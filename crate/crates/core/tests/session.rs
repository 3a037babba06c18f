mod common;

use common::{gradient, rect_mask, solid};
use matx_core::generation::{GenerationParams, MaterialExemplar, Pipeline};
use matx_core::imaging::{ForegroundMask, RasterImage};
use matx_core::session::{ExemplarHints, SessionRepository, SessionState, StepStatus};
use matx_core::store::{AssetKind, AssetStore};
use matx_core::Error;

const W: u32 = 48;
const H: u32 = 32;

struct Fixture {
    _dir: tempfile::TempDir,
    store: AssetStore,
    pipeline: Pipeline,
    base: RasterImage,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let store = AssetStore::open(dir.path().join("assets")).unwrap();
    Fixture {
        store,
        _dir: dir,
        pipeline: Pipeline::mock(),
        base: gradient(W, H),
    }
}

fn params(seed: u64) -> GenerationParams {
    GenerationParams {
        seed,
        working_size: 48,
        feather: 2,
        ..Default::default()
    }
}

struct StepSpec {
    mask: ForegroundMask,
    exemplar: RasterImage,
    seed: u64,
}

fn specs() -> Vec<StepSpec> {
    vec![
        StepSpec {
            mask: rect_mask(W, H, 2, 2, 14, 14),
            exemplar: solid([0.9, 0.1, 0.1]),
            seed: 11,
        },
        StepSpec {
            mask: rect_mask(W, H, 30, 4, 44, 20),
            exemplar: solid([0.1, 0.8, 0.2]),
            seed: 22,
        },
        StepSpec {
            mask: rect_mask(W, H, 4, 22, 40, 30),
            exemplar: solid([0.2, 0.3, 0.9]),
            seed: 33,
        },
    ]
}

fn session_with(f: &Fixture, steps: &[StepSpec]) -> SessionState {
    let base = f.store.put_raster(&f.base, AssetKind::Image).unwrap();
    let mut s = SessionState::new(base.id);
    for st in steps {
        let m = f.store.put_mask(&st.mask).unwrap();
        let e = f.store.put_raster(&st.exemplar, AssetKind::Exemplar).unwrap();
        s.add_step(m.id, e.id, ExemplarHints::default(), params(st.seed))
            .unwrap();
    }
    s
}

fn manual_fold(f: &Fixture, steps: &[StepSpec]) -> RasterImage {
    let mut img = f.base.clone();
    for st in steps {
        img = f
            .pipeline
            .transfer_material(
                &img,
                &st.mask,
                &MaterialExemplar::new(st.exemplar.clone()),
                &params(st.seed),
            )
            .unwrap()
            .image;
    }
    img
}

fn current(f: &Fixture, s: &SessionState) -> RasterImage {
    f.store.load_raster(s.current_image()).unwrap()
}

#[test]
fn empty_plan_is_a_no_op() {
    let f = fixture();
    let mut s = session_with(&f, &[]);
    let before = s.clone();
    let out = s.apply_plan(&f.pipeline, &f.store, None).unwrap();
    assert!(out.executed.is_empty());
    assert_eq!(s, before);
}

#[test]
fn plan_equals_manual_fold_for_two_and_three_steps() {
    for n in [2, 3] {
        let f = fixture();
        let all = specs();
        let steps = &all[..n];
        let mut s = session_with(&f, steps);
        let out = s.apply_plan(&f.pipeline, &f.store, None).unwrap();
        assert_eq!(out.executed, (0..n).collect::<Vec<_>>());
        assert_eq!(out.failed, None);
        assert_eq!(current(&f, &s), manual_fold(&f, steps), "n = {n}");
        assert_eq!(s.history.len(), n);
    }
}

#[test]
fn disjoint_steps_commute() {
    let f = fixture();
    let all = specs();
    let ab = manual_fold(&f, &all[..2]);
    let ba = manual_fold(&f, &[all.into_iter().nth(1).unwrap(), specs().remove(0)]);
    assert_eq!(ab, ba);
}

#[test]
fn overlapping_steps_are_order_sensitive() {
    let f = fixture();
    let a = StepSpec {
        mask: rect_mask(W, H, 4, 4, 30, 24),
        exemplar: solid([0.9, 0.1, 0.1]),
        seed: 1,
    };
    let b = StepSpec {
        mask: rect_mask(W, H, 16, 8, 44, 28),
        exemplar: solid([0.1, 0.2, 0.9]),
        seed: 2,
    };
    let ab = manual_fold(&f, &[a, b]);
    let a = StepSpec {
        mask: rect_mask(W, H, 4, 4, 30, 24),
        exemplar: solid([0.9, 0.1, 0.1]),
        seed: 1,
    };
    let b = StepSpec {
        mask: rect_mask(W, H, 16, 8, 44, 28),
        exemplar: solid([0.1, 0.2, 0.9]),
        seed: 2,
    };
    let ba = manual_fold(&f, &[b, a]);
    assert_ne!(ab, ba);
    // Inside the overlap the later step's material dominates.
    let px_ab = ab.pixel(24, 16);
    let px_ba = ba.pixel(24, 16);
    assert!(px_ab[2] > px_ab[0], "{px_ab:?}");
    assert!(px_ba[0] > px_ba[2], "{px_ba:?}");
}

#[test]
fn partial_apply_then_rest() {
    let f = fixture();
    let steps = specs();
    let mut s = session_with(&f, &steps);
    s.apply_plan(&f.pipeline, &f.store, Some(0)).unwrap();
    assert_eq!(s.done_count(), 1);
    assert_eq!(s.steps()[1].status, StepStatus::Pending);
    s.apply_plan(&f.pipeline, &f.store, None).unwrap();
    assert_eq!(current(&f, &s), manual_fold(&f, &steps));
    assert!(s.apply_plan(&f.pipeline, &f.store, Some(7)).is_err());
}

#[test]
fn rollback_and_replay_reproduce_state() {
    let f = fixture();
    let mut s = session_with(&f, &specs());
    s.apply_plan(&f.pipeline, &f.store, None).unwrap();
    let final_id = s.current_image().to_string();
    let last_done = s.steps()[2].result.clone().unwrap();

    s.rollback(3).unwrap();
    assert_eq!(s.current_image(), last_done);

    s.rollback(1).unwrap();
    assert_eq!(s.current_image(), s.steps()[0].result.as_deref().unwrap());
    assert_eq!(s.history.len(), 3);
    s.rollback(0).unwrap();
    assert_eq!(s.current_image(), s.plan.base_image);

    s.apply_plan(&f.pipeline, &f.store, None).unwrap();
    assert_eq!(s.current_image(), final_id);
    assert_eq!(s.history.len(), 6);
    assert_eq!(s.history[5].result, s.history[2].result);
}

#[test]
fn failure_is_recorded_on_the_step() {
    let f = fixture();
    let mut steps = specs();
    steps[1].mask = ForegroundMask::empty(W, H).unwrap();
    let mut s = session_with(&f, &steps);
    let out = s.apply_plan(&f.pipeline, &f.store, None).unwrap();
    assert_eq!(out.executed, vec![0]);
    assert_eq!(out.failed.as_ref().map(|f| f.step), Some(1));
    assert_eq!(out.failed.unwrap().kind, "empty-mask");
    assert_eq!(s.steps()[1].status, StepStatus::Failed);
    assert!(s.steps()[1].error.as_deref().unwrap().contains("empty mask"));
    assert_eq!(s.steps()[2].status, StepStatus::Pending);
    assert_eq!(s.history.len(), 1);
}

#[test]
fn missing_asset_names_the_step() {
    let f = fixture();
    let mut s = session_with(&f, &specs()[..1]);
    s.add_step(
        "f".repeat(64),
        s.steps()[0].exemplar.clone(),
        ExemplarHints::default(),
        params(1),
    )
    .unwrap();
    match s.apply_plan(&f.pipeline, &f.store, None).unwrap_err() {
        Error::Plan { step, message } => {
            assert_eq!(step, 1);
            assert!(message.contains("region"), "{message}");
        }
        e => panic!("{e}"),
    }
    assert_eq!(s.done_count(), 0);
}

#[test]
fn identical_reexecution_deduplicates_results() {
    let f = fixture();
    let mut a = session_with(&f, &specs()[..2]);
    let mut b = session_with(&f, &specs()[..2]);
    a.apply_plan(&f.pipeline, &f.store, None).unwrap();
    b.apply_plan(&f.pipeline, &f.store, None).unwrap();
    assert_ne!(a.id, b.id);
    assert_eq!(a.current_image(), b.current_image());
}

#[test]
fn persistence_round_trip_keeps_history_append_only() {
    let f = fixture();
    let repo = SessionRepository::open(f.store.root().parent().unwrap().join("sessions")).unwrap();
    let mut s = session_with(&f, &specs());
    repo.save(&s).unwrap();
    s.apply_plan(&f.pipeline, &f.store, Some(1)).unwrap();
    repo.save(&s).unwrap();
    let loaded = repo.load(&s.id).unwrap();
    assert_eq!(loaded, s);

    s.rollback(0).unwrap();
    s.apply_plan(&f.pipeline, &f.store, None).unwrap();
    repo.save(&s).unwrap();
    let loaded = repo.load(&s.id).unwrap();
    assert_eq!(loaded.history.len(), 5);
    assert_eq!(loaded.history[..2], s.history[..2]);
    assert_eq!(repo.list().unwrap(), vec![s.id.clone()]);

    let mut shrunk = s.clone();
    shrunk.history.pop();
    assert!(repo.save(&shrunk).is_err());
    assert!(repo.load("../etc").is_err());
}
