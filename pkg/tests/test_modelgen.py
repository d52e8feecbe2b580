"""Architecture registry, data loading, training loop, bundles, and grid."""

import io
import json
import zipfile
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from trojanlab.datagen import (
    CorpusConfig,
    Placement,
    TriggerConfig,
    TriggerKind,
    generate_clean_corpus,
)
from trojanlab.engine import Tensor
from trojanlab.experiment import PoisonPolicy, build_experiment, load_experiment
from trojanlab.modelgen import (
    ArchitectureError,
    BundleError,
    BundleVersionError,
    DataError,
    DataManager,
    DivergenceError,
    EarlyStopSpec,
    GridSpec,
    ModelgenError,
    OptimizerSpec,
    RunnerConfig,
    TrainingStatistics,
    build_architecture,
    cell_id,
    cell_trigger,
    config_from_dict,
    config_to_dict,
    grid_cells,
    instantiate,
    load_bundle,
    read_manifest,
    run_grid,
    save_bundle,
    split_validation,
    train_model,
)

TRIGGER = TriggerConfig(
    TriggerKind.REVERSE_LAMBDA, size=5, placement=Placement.static(21, 21)
)


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("mgcorpus")
    cfg = CorpusConfig(root=str(root), n_train=500, n_test=60, seed=3)
    generate_clean_corpus(cfg)
    return cfg


@pytest.fixture(scope="module")
def experiment(corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("mgexp")
    return build_experiment(corpus, PoisonPolicy(4, 5, 0.2, seed=1), TRIGGER, out)


def _config(corpus, experiment, **overrides) -> RunnerConfig:
    base = dict(
        train_csv=experiment.train,
        test_clean_csv=experiment.test_clean,
        test_triggered_csv=experiment.test_triggered,
        corpus_root=corpus.root,
    )
    base.update(overrides)
    return RunnerConfig(**base)


# --- architectures ---------------------------------------------------------


def test_mnist_small_forward_shape():
    model = build_architecture("mnist-small", seed=0)
    out = model(Tensor(np.zeros((2, 1, 28, 28), dtype=np.float32)))
    assert out.shape == (2, 10)


def test_unknown_architecture_names_known_ones():
    with pytest.raises(ArchitectureError, match="mnist-small"):
        build_architecture("resnet-900")


def test_architecture_init_is_seed_determined():
    a = build_architecture("mnist-small", seed=5)
    b = build_architecture("mnist-small", seed=5)
    c = build_architecture("mnist-small", seed=6)
    for (na, pa), (nb, pb), (nc, pc) in zip(
        a.parameters(), b.parameters(), c.parameters()
    ):
        assert na == nb == nc
        np.testing.assert_array_equal(pa.data, pb.data)
    weights_differ = any(
        not np.array_equal(pa.data, pc.data)
        for (_, pa), (_, pc) in zip(a.parameters(), c.parameters())
    )
    assert weights_differ


# --- data manager ----------------------------------------------------------


def test_data_manager_loads_experiment(corpus, experiment):
    ds = DataManager(corpus.root).load(experiment.train)
    assert ds.images.shape == (500, 1, 28, 28)
    assert ds.images.dtype == np.float32
    assert ds.images.min() >= 0.0 and ds.images.max() <= 1.0
    assert ds.triggered.sum() == 10  # 50 fours, 20% poisoned
    poisoned = ds.triggered
    assert np.all(ds.train_labels[poisoned] == 5)
    assert np.all(ds.true_labels[poisoned] == 4)


def test_data_manager_missing_file_errors(corpus, experiment, tmp_path):
    records, _ = load_experiment(experiment.train)
    with pytest.raises(DataError, match="missing corpus file"):
        DataManager(tmp_path).load_records(records)


def test_data_manager_rejects_invalid_experiment(corpus, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text(
        "file,true_label,train_label,triggered\r\nclean/train/00000.png,1,2,False\r\n"
    )
    with pytest.raises(DataError, match="invalid experiment"):
        DataManager(corpus.root).load(bad)


def test_split_validation_uses_only_clean_rows():
    triggered = np.zeros(100, dtype=bool)
    triggered[:20] = True
    train_idx, val_idx = split_validation(100, triggered, 0.1, seed=0)
    assert len(val_idx) == 8  # 10% of the 80 clean rows
    assert not triggered[val_idx].any()
    assert set(train_idx) | set(val_idx) == set(range(100))
    assert set(train_idx) & set(val_idx) == set()
    # determinism
    again = split_validation(100, triggered, 0.1, seed=0)
    np.testing.assert_array_equal(val_idx, again[1])


def test_split_validation_rejects_bad_fraction():
    with pytest.raises(DataError):
        split_validation(10, np.zeros(10, dtype=bool), 0.0, seed=0)
    with pytest.raises(DataError):
        split_validation(10, np.zeros(10, dtype=bool), 1.0, seed=0)


# --- runner ----------------------------------------------------------------


def test_config_dict_round_trip(corpus, experiment):
    cfg = _config(
        corpus,
        experiment,
        optimizer=OptimizerSpec("sgd", 0.01, 16),
        early_stop=EarlyStopSpec(3, 1e-3, 7),
        base_seed=11,
    )
    assert config_from_dict(config_to_dict(cfg)) == cfg


def test_runner_config_validation(corpus, experiment):
    with pytest.raises(ModelgenError, match="models_per_config"):
        _config(corpus, experiment, models_per_config=0)
    with pytest.raises(ModelgenError, match="batch_size"):
        OptimizerSpec(batch_size=0)
    with pytest.raises(ModelgenError, match="max_epochs"):
        EarlyStopSpec(max_epochs=0)
    with pytest.raises(ModelgenError, match="algorithm"):
        OptimizerSpec(algorithm="adagrad")


def test_statistics_invariants():
    with pytest.raises(ModelgenError, match="epochs_trained"):
        TrainingStatistics((1.0,), (1.0,), (0.5, 0.6), 1, "early", 1.0)
    with pytest.raises(ModelgenError, match="stop_reason"):
        TrainingStatistics((1.0,), (1.0,), (0.5,), 1, "boredom", 1.0)


def test_training_is_reproducible(corpus, experiment):
    cfg = _config(corpus, experiment, early_stop=EarlyStopSpec(max_epochs=2))
    a = train_model(cfg, 0)
    b = train_model(cfg, 0)
    assert replace(a.statistics, wall_time=0.0) == replace(b.statistics, wall_time=0.0)
    for (na, wa), (nb, wb) in zip(a.weights, b.weights):
        assert na == nb
        np.testing.assert_array_equal(wa, wb)
    c = train_model(cfg, 1)
    assert any(
        not np.array_equal(wa, wc) for (_, wa), (_, wc) in zip(a.weights, c.weights)
    )


def test_stop_reason_max_epochs_when_loss_keeps_improving(corpus, experiment):
    # 2 epochs of fresh training always improve, so early stop cannot fire
    cfg = _config(corpus, experiment, early_stop=EarlyStopSpec(max_epochs=2))
    bundle = train_model(cfg, 0)
    stats = bundle.statistics
    assert stats.stop_reason == "max_epochs"
    assert stats.epochs_trained == 2
    assert len(stats.train_loss) == len(stats.val_loss) == len(stats.val_accuracy) == 2


def test_early_stop_fires_and_respects_patience(corpus, experiment):
    # an enormous min_delta means epoch 1 sets the bar and nothing improves
    cfg = _config(
        corpus,
        experiment,
        early_stop=EarlyStopSpec(patience=2, min_delta=1e9, max_epochs=30),
    )
    stats = train_model(cfg, 0).statistics
    assert stats.stop_reason == "early"
    assert stats.epochs_trained == 3  # first epoch plus patience stale epochs
    best = stats.val_loss[0]
    assert all(v >= best - 1e9 for v in stats.val_loss[1:])


def test_divergence_raises_with_progress(corpus, experiment):
    cfg = _config(
        corpus,
        experiment,
        optimizer=OptimizerSpec("sgd", 1e20, 32),
        early_stop=EarlyStopSpec(max_epochs=3),
    )
    with pytest.raises(DivergenceError) as err:
        with np.errstate(over="ignore", invalid="ignore"):
            train_model(cfg, 0)
    assert err.value.epoch >= 1
    assert isinstance(err.value.statistics, TrainingStatistics)


def test_sanity_small_clean_run_reaches_090(corpus, experiment, tmp_path):
    # 0% poisoning: the engine must actually learn the task
    paths = build_experiment(corpus, PoisonPolicy(4, 5, 0.0), TRIGGER, tmp_path)
    cfg = RunnerConfig(
        train_csv=paths.train,
        test_clean_csv=paths.test_clean,
        test_triggered_csv=paths.test_triggered,
        corpus_root=corpus.root,
    )
    stats = train_model(cfg, 0).statistics
    assert max(stats.val_accuracy) > 0.9


# --- bundles ---------------------------------------------------------------


@pytest.fixture(scope="module")
def trained(corpus, experiment):
    cfg = _config(corpus, experiment, early_stop=EarlyStopSpec(max_epochs=2))
    return train_model(cfg, 0)


def test_bundle_round_trip_bitwise(trained, tmp_path):
    path = tmp_path / "m.zip"
    save_bundle(trained, path)
    loaded = load_bundle(path)
    assert loaded.architecture == trained.architecture
    assert loaded.model_index == trained.model_index
    assert loaded.config == trained.config
    assert loaded.statistics == trained.statistics
    for (na, wa), (nb, wb) in zip(trained.weights, loaded.weights):
        assert na == nb
        np.testing.assert_array_equal(wa, wb)


def test_bundle_reload_evaluates_identically(trained, tmp_path):
    path = tmp_path / "m.zip"
    save_bundle(trained, path)
    batch = Tensor(np.random.default_rng(0).random((4, 1, 28, 28), dtype=np.float32))
    before = instantiate(trained)(batch).data
    after = instantiate(load_bundle(path))(batch).data
    np.testing.assert_array_equal(before, after)


def test_bundle_bytes_are_deterministic(trained, tmp_path):
    a, b = tmp_path / "a.zip", tmp_path / "b.zip"
    save_bundle(trained, a)
    save_bundle(trained, b)
    assert a.read_bytes() == b.read_bytes()


def test_truncated_bundle_is_a_clean_error(trained, tmp_path):
    path = tmp_path / "m.zip"
    save_bundle(trained, path)
    clipped = path.read_bytes()[:100]
    bad = tmp_path / "bad.zip"
    bad.write_bytes(clipped)
    with pytest.raises(BundleError, match="corrupt"):
        load_bundle(bad)


def _rewrite_meta(src: Path, dst: Path, mutate) -> None:
    with zipfile.ZipFile(src) as zf:
        meta = json.loads(zf.read("meta.json"))
        weights = zf.read("weights.bin")
    mutate(meta)
    with zipfile.ZipFile(dst, "w", compression=zipfile.ZIP_STORED) as zf:
        zf.writestr("meta.json", json.dumps(meta))
        zf.writestr("weights.bin", weights)


def test_bundle_version_mismatch(trained, tmp_path):
    path = tmp_path / "m.zip"
    save_bundle(trained, path)
    bad = tmp_path / "future.zip"
    _rewrite_meta(path, bad, lambda m: m.update(bundle_version=99))
    with pytest.raises(BundleVersionError, match="99"):
        load_bundle(bad)


def test_bundle_unknown_architecture(trained, tmp_path):
    path = tmp_path / "m.zip"
    save_bundle(trained, path)
    bad = tmp_path / "alien.zip"
    _rewrite_meta(path, bad, lambda m: m.update(architecture="cifar-huge"))
    with pytest.raises(ArchitectureError, match="cifar-huge"):
        load_bundle(bad)


def test_bundle_missing_file(tmp_path):
    with pytest.raises(BundleError, match="no such bundle"):
        load_bundle(tmp_path / "ghost.zip")


# --- grid ------------------------------------------------------------------


def test_default_grid_matches_full_matrix(tmp_path):
    spec = GridSpec()
    cells = grid_cells(spec)
    assert len(cells) == 144  # 2 * 2 * 2 * 6 * 3
    manifest = run_grid(
        CorpusConfig(root=str(tmp_path / "nocorpus")),
        spec,
        tmp_path / "grid",
        dry_run=True,
    )
    rows = read_manifest(manifest)
    assert len(rows) == 144 * 15
    assert len({r["cell_id"] for r in rows}) == 144
    # manifest is a bijection onto cells x model indices
    keys = {(r["cell_id"], r["model_index"]) for r in rows}
    assert len(keys) == len(rows)
    assert list(rows[0].keys()) == [
        "cell_id", "trigger", "placement", "xform", "poison_pct",
        "batch_size", "model_index", "status", "bundle_path", "epochs_trained",
    ]


def test_grid_spec_rejects_unknown_axis_value():
    with pytest.raises(ModelgenError, match="unsupported"):
        GridSpec(triggers=("reverse_lambda", "smiley_face"))


def test_cell_trigger_mapping():
    spec = GridSpec(n_per_config=1)
    cells = grid_cells(spec)
    static = next(c for c in cells if c.placement == "static" and c.xform == "none")
    trig = cell_trigger(static, master_seed=0)
    assert trig.kind.value == static.trigger
    assert trig.placement.mode == "static"
    assert trig.rotation.mode == "none"
    dynamic = next(
        c for c in cells if c.placement == "dynamic" and c.xform == "random_rotation"
    )
    trig2 = cell_trigger(dynamic, master_seed=0)
    assert trig2.placement.mode == "dynamic"
    assert trig2.rotation.mode == "random"
    assert cell_id(static) != cell_id(dynamic)


@pytest.fixture(scope="module")
def mini_grid_run(corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("minigrid")
    spec = GridSpec(
        triggers=("reverse_lambda",),
        placements=("static",),
        xforms=("none",),
        poison_pcts=(20,),
        batch_sizes=(32,),
        n_per_config=2,
    )
    manifest = run_grid(
        corpus,
        spec,
        out,
        early_stop=EarlyStopSpec(max_epochs=2),
        master_seed=1,
    )
    return out, spec, manifest


def test_grid_trains_and_records(mini_grid_run):
    out, spec, manifest = mini_grid_run
    rows = read_manifest(manifest)
    assert len(rows) == 2
    for row in rows:
        assert row["status"] == "done"
        assert row["epochs_trained"] == "2"
        bundle = load_bundle(row["bundle_path"])
        assert bundle.model_index == int(row["model_index"])


def test_grid_resume_skips_existing(corpus, mini_grid_run):
    out, spec, manifest = mini_grid_run
    rows = read_manifest(manifest)
    keep = Path(rows[0]["bundle_path"])
    redo = Path(rows[1]["bundle_path"])
    kept_mtime = keep.stat().st_mtime_ns
    redo.unlink()
    run_grid(
        corpus, spec, out, early_stop=EarlyStopSpec(max_epochs=2), master_seed=1
    )
    assert keep.stat().st_mtime_ns == kept_mtime  # untouched
    assert redo.exists()  # retrained
    rows = read_manifest(manifest)
    assert all(r["status"] == "done" for r in rows)


def test_grid_records_failure_and_continues(corpus, tmp_path):
    # poisoning a label with no triggered files on disk: sabotage one PNG
    spec = GridSpec(
        triggers=("reverse_lambda",),
        placements=("static",),
        xforms=("none",),
        poison_pcts=(20,),
        batch_sizes=(32,),
        n_per_config=1,
    )
    # break the corpus for this grid only: remove a non-source PNG after copy
    import shutil

    root = tmp_path / "broken"
    shutil.copytree(corpus.root, root)
    (root / "clean" / "train" / "00000.png").unlink()
    broken = CorpusConfig(
        root=str(root), n_train=corpus.n_train, n_test=corpus.n_test, seed=corpus.seed
    )
    manifest = run_grid(
        broken, spec, tmp_path / "grid", early_stop=EarlyStopSpec(max_epochs=1)
    )
    rows = read_manifest(manifest)
    assert len(rows) == 1
    assert rows[0]["status"].startswith("failed:")
    assert "00000.png" in rows[0]["status"]
