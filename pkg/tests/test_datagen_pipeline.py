"""Declarative pipelines: ordering, determinism, type checks."""

import numpy as np
import pytest

from trojanlab.datagen import (
    ImageEntity,
    MergeStage,
    PipelineError,
    PipelineSpec,
    Placement,
    Stage,
    TextEntity,
    TriggerConfig,
    TriggerKind,
    insert,
    make_trigger,
    run_pipeline,
)


def _host(n=28):
    return ImageEntity(
        np.zeros((n, n, 1), dtype=np.float32), np.zeros((n, n), dtype=bool)
    )


def _lambda_trigger():
    return make_trigger(TriggerConfig(TriggerKind.REVERSE_LAMBDA, size=5))


def test_identity_pipeline_keeps_bg_unchanged():
    # no transforms, merge with an entity that stamps nothing
    bg = _host()
    empty_fg = ImageEntity(
        np.zeros((3, 3, 1), dtype=np.float32), np.zeros((3, 3), dtype=bool)
    )
    spec = PipelineSpec(
        merge=MergeStage("insert", {"placement": Placement.static(0, 0)})
    )
    out = run_pipeline(bg, empty_fg, spec)
    np.testing.assert_array_equal(out.pixels, bg.pixels)


def test_static_insert_pipeline_equals_direct_op():
    # classic patch pipeline: plain trigger, static insert
    bg = _host()
    fg = _lambda_trigger()
    spec = PipelineSpec(
        merge=MergeStage("insert", {"placement": Placement.static(21, 21)})
    )
    out = run_pipeline(bg, fg, spec)
    direct = insert(bg, fg, Placement.static(21, 21))
    np.testing.assert_array_equal(out.pixels, direct.pixels)


def test_pipeline_same_seed_bit_identical():
    bg = _host()
    fg = _lambda_trigger()
    spec = PipelineSpec(
        fg_xforms=(Stage("random_rotate"),),
        merge=MergeStage("insert", {"placement": Placement.dynamic()}),
    )
    a = run_pipeline(bg, fg, spec, np.random.default_rng(9))
    b = run_pipeline(bg, fg, spec, np.random.default_rng(9))
    assert a.pixels.tobytes() == b.pixels.tobytes()
    c = run_pipeline(bg, fg, spec, np.random.default_rng(10))
    assert a.pixels.tobytes() != c.pixels.tobytes()


def test_stage_order_bg_fg_merge_final():
    # resize the bg up, insert, then rotate the merged result; wrong order
    # would put the trigger elsewhere
    bg = _host(14)
    fg = make_trigger(TriggerConfig(TriggerKind.RECTANGULAR, size=3))
    spec = PipelineSpec(
        bg_xforms=(Stage("resize", {"w": 28, "h": 28}),),
        merge=MergeStage("insert", {"placement": Placement.static(0, 0)}),
        final_xforms=(Stage("rotate", {"angle": 180.0}),),
    )
    out = run_pipeline(bg, fg, spec)
    assert out.height == 28
    region = out.pixels[25:, 25:, 0]
    assert (region == 1.0).all()


def test_type_incompatible_stage_names_stage():
    text = TextEntity.from_string("Hello there.")
    spec = PipelineSpec(bg_xforms=(Stage("rotate", {"angle": 90}),))
    with pytest.raises(PipelineError) as excinfo:
        run_pipeline(text, None, spec)
    assert "rotate" in str(excinfo.value)


def test_image_fg_with_text_merge_rejected():
    spec = PipelineSpec(merge=MergeStage("insert_text", {"position": 0}))
    with pytest.raises(PipelineError) as excinfo:
        run_pipeline(_host(), _lambda_trigger(), spec)
    assert "insert_text" in str(excinfo.value)


def test_text_pipeline_splices_trigger():
    host = TextEntity.from_string("Good film. Loved it.")
    trig = TextEntity.from_string("Random sentence.")
    spec = PipelineSpec(merge=MergeStage("insert_text", {"position": 0}))
    out = run_pipeline(host, trig, spec)
    assert out.to_string() == "Good film. Random sentence. Loved it."


def test_unknown_stage_rejected():
    spec = PipelineSpec(bg_xforms=(Stage("sharpen"),))
    with pytest.raises(PipelineError):
        run_pipeline(_host(), None, spec)


def test_missing_stage_param_rejected():
    spec = PipelineSpec(bg_xforms=(Stage("rotate"),))
    with pytest.raises(PipelineError) as excinfo:
        run_pipeline(_host(), None, spec)
    assert "angle" in str(excinfo.value)


def test_merge_without_fg_rejected():
    spec = PipelineSpec(
        merge=MergeStage("insert", {"placement": Placement.static(0, 0)})
    )
    with pytest.raises(PipelineError):
        run_pipeline(_host(), None, spec)


def test_spec_dict_round_trip():
    spec = PipelineSpec(
        bg_xforms=(Stage("colorize", {"tint": [1.0, 0.5, 0.0]}),),
        fg_xforms=(Stage("rotate", {"angle": 90.0}),),
        merge=MergeStage(
            "insert", {"placement": {"mode": "static", "x": 2, "y": 3}}
        ),
        final_xforms=(Stage("instagram_filter", {"kind": "lomo"}),),
    )
    round_tripped = PipelineSpec.from_dict(spec.to_dict())
    assert round_tripped == spec


def test_spec_from_dict_rejects_unknown_keys():
    with pytest.raises(PipelineError):
        PipelineSpec.from_dict({"bg_xforms": [], "stages": []})
    with pytest.raises(PipelineError):
        Stage.from_dict({"params": {}})


def test_pixel_range_preserved_through_random_chains():
    rng = np.random.default_rng(11)
    stages = [
        Stage("rotate", {"angle": 33.0}),
        Stage("resize", {"w": 17, "h": 19}),
        Stage("random_rotate"),
        Stage("resize", {"w": 28, "h": 28}),
    ]
    for seed in range(10):
        g = np.random.default_rng(seed)
        pixels = g.uniform(0, 1, size=(28, 28, 1)).astype(np.float32)
        bg = ImageEntity(pixels, g.uniform(0, 1, size=(28, 28)) > 0.5)
        order = list(rng.permutation(len(stages)))
        spec = PipelineSpec(bg_xforms=tuple(stages[i] for i in order))
        out = run_pipeline(bg, None, spec, g)
        assert out.pixels.min() >= 0.0 and out.pixels.max() <= 1.0
