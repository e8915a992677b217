import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fusetrack import cli
from fusetrack.bench import (
    SynthSpec,
    TrackRun,
    emit_report,
    evaluate,
    iou,
    load_config,
    load_curve,
    load_otb_sequence,
    precision_curve,
    run_ope,
    save_sequence,
    success_curve,
    summarize_results,
    synth_sequence,
)
from fusetrack.tracker import TrackerConfig

FAST = TrackerConfig(gn_iters=1, cg_iters=8)


def tiny_spec(**kwargs):
    defaults = dict(canvas_w=120, canvas_h=90, target_w=28, target_h=28, num_frames=4, seed=9)
    defaults.update(kwargs)
    return SynthSpec(**defaults)


boxes_strategy = st.tuples(
    st.floats(-50, 50), st.floats(-50, 50), st.floats(1, 60), st.floats(1, 60)
)


class TestLoadSequence:
    def write_fixture(self, root, gt_lines, n_frames=4):
        seq_dir = root / "toy"
        img = seq_dir / "img"
        img.mkdir(parents=True)
        frame = synth_sequence(tiny_spec(num_frames=1)).frame(0)
        from PIL import Image

        for i in range(n_frames):
            Image.fromarray(frame).save(img / f"{i + 1:04d}.jpg")
        (seq_dir / "groundtruth_rect.txt").write_text("\n".join(gt_lines) + "\n")
        return seq_dir

    def test_parses_mixed_delimiters(self, tmp_path):
        seq = load_otb_sequence(
            self.write_fixture(
                tmp_path,
                ["100,80,50,60", "100\t80\t50\t60", "100 80 50 60", "101, 81, 50, 60"],
            )
        )
        assert len(seq) == 4
        assert np.array_equal(seq.boxes[0], [100, 80, 50, 60])
        assert np.array_equal(seq.boxes[0], seq.boxes[1])
        assert np.array_equal(seq.boxes[1], seq.boxes[2])

    def test_flags_nonpositive_rows(self, tmp_path):
        seq = load_otb_sequence(
            self.write_fixture(tmp_path, ["10,10,5,5", "10,10,0,5", "10,10,5,5", "1,1,2,2"])
        )
        assert seq.flagged == (1,)

    def test_bad_line_reports_line_number(self, tmp_path):
        seq_dir = self.write_fixture(tmp_path, ["10,10,5,5", "10,10,5", "1,1,2,2", "1,1,2,2"])
        with pytest.raises(ValueError, match="line 2"):
            load_otb_sequence(seq_dir)

    def test_count_mismatch_raises(self, tmp_path):
        seq_dir = self.write_fixture(tmp_path, ["10,10,5,5", "10,10,5,5"])
        with pytest.raises(ValueError, match="ground-truth rows"):
            load_otb_sequence(seq_dir)

    def test_missing_pieces_raise(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_otb_sequence(tmp_path / "nope")

    def test_roundtrip_through_disk(self, tmp_path):
        seq = synth_sequence(tiny_spec(name="toy"))
        out = save_sequence(seq, tmp_path / "toy")
        loaded = load_otb_sequence(out)
        assert np.array_equal(loaded.boxes, seq.boxes)
        assert len(loaded) == len(seq)
        for i in range(len(seq)):
            assert np.array_equal(loaded.frame(i), seq.frame(i))
        again = save_sequence(loaded, tmp_path / "toy2")
        reloaded = load_otb_sequence(again)
        assert np.array_equal(reloaded.boxes, loaded.boxes)

    def test_attributes_sidecar(self, tmp_path):
        seq_dir = self.write_fixture(tmp_path, ["1,1,2,2"] * 4)
        (seq_dir / "attributes.txt").write_text("IV, OCC\n")
        assert load_otb_sequence(seq_dir).attributes == ("IV", "OCC")


class TestSynthSequence:
    def test_static_script_repeats_frames(self):
        seq = synth_sequence(tiny_spec(num_frames=10))
        first = seq.frame(0)
        for i in range(1, 10):
            assert np.array_equal(seq.frame(i), first)
        assert np.all(seq.boxes == seq.boxes[0])

    def test_translation_makes_arithmetic_ground_truth(self):
        spec = tiny_spec(num_frames=10, start_x=30.0, events=[("translate", 2.0, 0.0, 1, 50)])
        seq = synth_sequence(spec)
        xs = seq.boxes[:, 0]
        assert np.allclose(np.diff(xs), 2.0)

    def test_illumination_gain_scales_intensity(self):
        spec = tiny_spec(num_frames=30, events=[("gain", 1.3, 25)])
        seq = synth_sequence(spec)
        before = seq.frame(24).astype(np.float64).mean()
        after = seq.frame(25).astype(np.float64).mean()
        assert after / before == pytest.approx(1.3, rel=0.05)

    def test_seeded_runs_are_bit_identical(self):
        a = synth_sequence(tiny_spec(events=[("clutter", 3)]))
        b = synth_sequence(tiny_spec(events=[("clutter", 3)]))
        for i in range(len(a)):
            assert np.array_equal(a.frame(i), b.frame(i))
        assert np.array_equal(a.boxes, b.boxes)

    def test_target_leaving_canvas_raises(self):
        spec = tiny_spec(num_frames=30, start_x=100.0, events=[("translate", 5.0, 0.0, 1, 99)])
        with pytest.raises(ValueError, match="canvas"):
            synth_sequence(spec)

    def test_spec_file_roundtrip(self, tmp_path):
        text = (
            "canvas_w = 120\ncanvas_h = 90\nnum_frames = 5\n"
            "target_w = 28\ntarget_h = 28\nseed = 9\nname = scripted\n"
            "event = translate 2 0\nevent = gain 1.2 3\n"
        )
        path = tmp_path / "spec.txt"
        path.write_text(text)
        spec = SynthSpec.from_file(path)
        assert spec.num_frames == 5
        assert spec.events[0][:3] == ("translate", 2.0, 0.0)
        assert spec.events[1] == ("gain", 1.2, 3)
        seq = synth_sequence(spec)
        assert len(seq) == 5

    def test_spec_file_errors(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("bogus = 1\n")
        with pytest.raises(ValueError, match="unknown key"):
            SynthSpec.from_file(path)
        path.write_text("event = warp 1 2\n")
        with pytest.raises(ValueError, match="unknown event"):
            SynthSpec.from_file(path)


class TestRunOpe:
    def test_single_frame_sequence_returns_init_box(self):
        seq = synth_sequence(tiny_spec(num_frames=1))
        run = run_ope(FAST, seq)
        assert run.boxes.shape == (1, 4)
        assert np.allclose(run.boxes[0], seq.boxes[0])

    def test_static_sequence_has_tiny_center_error(self):
        seq = synth_sequence(tiny_spec(num_frames=8))
        run = run_ope(FAST, seq)
        _, _, _, cpe = precision_curve(run.boxes, seq.boxes)
        assert cpe.mean() <= 2.0

    def test_timing_is_positive_and_finite(self):
        seq = synth_sequence(tiny_spec(num_frames=4))
        run = run_ope(FAST, seq)
        assert run.fps > 0 and np.isfinite(run.fps)
        assert run.seconds > 0


class TestMetrics:
    def test_perfect_trajectory(self):
        gt = np.array([[10.0, 10.0, 20.0, 20.0]] * 5)
        _, curve, p20, _ = precision_curve(gt, gt)
        assert p20 == 1.0
        assert np.all(curve == 1.0)
        _, scurve, auc, _ = success_curve(gt, gt)
        assert auc == 1.0
        assert np.all(scurve == 1.0)

    def test_constant_offset_step_function(self):
        gt = np.array([[10.0, 10.0, 20.0, 20.0]] * 4)
        traj = gt + np.array([25.0, 0.0, 0.0, 0.0])
        thresholds, curve, p20, _ = precision_curve(traj, gt)
        assert p20 == 0.0
        assert curve[25] == 1.0
        assert curve[24] == 0.0

    def test_mixed_offsets_fraction(self):
        gt = np.array([[0.0, 0.0, 10.0, 10.0]] * 3)
        traj = gt.copy()
        traj[1, 0] += 10.0
        traj[2, 0] += 30.0
        _, _, p20, _ = precision_curve(traj, gt)
        assert p20 == pytest.approx(2.0 / 3.0)

    def test_iou_known_value(self):
        a = np.array([[0.0, 0.0, 10.0, 10.0]])
        b = np.array([[5.0, 0.0, 10.0, 10.0]])
        assert iou(a, b)[0] == pytest.approx(1.0 / 3.0)

    def test_disjoint_boxes(self):
        a = np.array([[0.0, 0.0, 5.0, 5.0]])
        b = np.array([[20.0, 20.0, 5.0, 5.0]])
        _, curve, auc, ov = success_curve(a, b)
        assert ov[0] == 0.0
        assert curve[25] == 0.0

    @settings(max_examples=40)
    @given(a=boxes_strategy, b=boxes_strategy)
    def test_iou_symmetric_and_bounded(self, a, b):
        va = iou(np.array([a]), np.array([b]))[0]
        vb = iou(np.array([b]), np.array([a]))[0]
        assert va == pytest.approx(vb)
        assert 0.0 <= va <= 1.0

    def test_iou_one_only_for_identical(self):
        a = np.array([[1.0, 2.0, 3.0, 4.0]])
        assert iou(a, a)[0] == 1.0
        assert iou(a, a + [0.5, 0, 0, 0])[0] < 1.0

    @settings(max_examples=25)
    @given(st.lists(st.tuples(boxes_strategy, boxes_strategy), min_size=1, max_size=8))
    def test_curve_monotonicity(self, pairs):
        traj = np.array([p[0] for p in pairs])
        gt = np.array([p[1] for p in pairs])
        _, pcurve, _, _ = precision_curve(traj, gt)
        _, scurve, _, _ = success_curve(traj, gt)
        assert np.all(np.diff(pcurve) >= 0)
        assert np.all(np.diff(scurve) <= 0)

    def test_length_mismatch_raises(self):
        with pytest.raises(ValueError):
            precision_curve(np.zeros((3, 4)), np.zeros((4, 4)))
        with pytest.raises(ValueError):
            success_curve(np.zeros((3, 4)), np.zeros((4, 4)))


class TestReports:
    def run_and_report(self, tmp_path, specs):
        reports = []
        for spec in specs:
            seq = synth_sequence(spec)
            reports.append(evaluate(seq, run_ope(FAST, seq)))
        out = emit_report(reports, tmp_path / "out")
        return reports, out

    def test_perfect_sequence_aggregates_to_one(self, tmp_path):
        seq = synth_sequence(tiny_spec(num_frames=3, name="perfect"))
        run = TrackRun(seq.boxes.copy(), [], fps=100.0, seconds=0.1)
        out = emit_report([evaluate(seq, run)], tmp_path / "out")
        summary = json.loads((out / "summary.json").read_text())
        assert summary["aggregate"]["precision_at_20"] == 1.0
        assert summary["aggregate"]["success_auc"] == 1.0

    def test_aggregate_is_mean_over_sequences(self, tmp_path):
        seq = synth_sequence(tiny_spec(num_frames=3, name="one"))
        perfect = TrackRun(seq.boxes.copy(), [], fps=10.0, seconds=0.1)
        off = TrackRun(seq.boxes + np.array([100.0, 0.0, 0.0, 0.0]), [], fps=10.0, seconds=0.1)
        rep_a = evaluate(seq, perfect)
        seq_b = synth_sequence(tiny_spec(num_frames=3, name="two"))
        rep_b = evaluate(seq_b, off)
        out = emit_report([rep_a, rep_b], tmp_path / "out")
        summary = json.loads((out / "summary.json").read_text())
        expected = (rep_a.precision_at_20 + rep_b.precision_at_20) / 2.0
        assert summary["aggregate"]["precision_at_20"] == pytest.approx(expected)

    def test_curves_roundtrip_through_csv(self, tmp_path):
        reports, out = self.run_and_report(tmp_path, [tiny_spec(num_frames=4, name="rt")])
        thresholds, values = load_curve(out / "rt_precision.csv")
        assert np.allclose(thresholds, reports[0].precision_thresholds, atol=1e-9)
        assert np.allclose(values, reports[0].precision, atol=1e-9)
        _, svalues = load_curve(out / "rt_success.csv")
        assert np.allclose(svalues, reports[0].success, atol=1e-9)

    def test_diagnostics_csv_layout(self, tmp_path):
        _, out = self.run_and_report(tmp_path, [tiny_spec(num_frames=4, name="diag")])
        lines = (out / "diag_diagnostics.csv").read_text().strip().splitlines()
        assert lines[0] == "frame,cpe,iou,apce,r_t,alpha_t,gate"
        assert len(lines) == 4  # header + 3 stepped frames

    def test_attribute_slices(self, tmp_path):
        seq = synth_sequence(tiny_spec(num_frames=3, name="tagged"))
        seq.attributes = ("IV",)
        rep = evaluate(seq, TrackRun(seq.boxes.copy(), [], 1.0, 1.0))
        out = emit_report([rep], tmp_path / "out")
        summary = json.loads((out / "summary.json").read_text())
        assert summary["attributes"]["IV"]["sequences"] == 1

    def test_summarize_results_matches_summary(self, tmp_path):
        _, out = self.run_and_report(
            tmp_path, [tiny_spec(num_frames=4, name="a"), tiny_spec(num_frames=4, name="b", seed=11)]
        )
        summary = json.loads((out / "summary.json").read_text())
        redone = summarize_results(out)
        assert redone["aggregate"]["precision_at_20"] == pytest.approx(
            summary["aggregate"]["precision_at_20"], abs=1e-9
        )

    def test_empty_report_raises(self, tmp_path):
        with pytest.raises(ValueError):
            emit_report([], tmp_path / "out")


class TestConfigFile:
    def test_parse_and_defaults(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("cf_reg = 0.002\nn_scales = 3\nadaptive_fusion = false\n# comment\n")
        cfg = load_config(path)
        assert cfg.cf_reg == 0.002
        assert cfg.n_scales == 3
        assert cfg.adaptive_fusion is False
        assert cfg.color_bins == 32

    def test_unknown_key_raises(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("bogus = 1\n")
        with pytest.raises(ValueError, match="unknown key"):
            load_config(path)

    def test_bad_value_raises(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("n_scales = maybe\n")
        with pytest.raises(ValueError, match="cannot parse"):
            load_config(path)


class TestCli:
    def test_synth_track_report_pipeline(self, tmp_path):
        spec_file = tmp_path / "spec.txt"
        spec_file.write_text(
            "canvas_w = 120\ncanvas_h = 90\nnum_frames = 4\n"
            "target_w = 28\ntarget_h = 28\nseed = 9\nname = clip\n"
        )
        seq_dir = tmp_path / "clip"
        assert cli.main(["synth", str(spec_file), "--out", str(seq_dir)]) == 0

        cfg = tmp_path / "cfg.txt"
        cfg.write_text("gn_iters = 1\ncg_iters = 8\n")
        out = tmp_path / "results"
        assert cli.main(["track", str(seq_dir), "--config", str(cfg), "--out", str(out)]) == 0
        assert (out / "summary.json").is_file()
        assert cli.main(["report", str(out)]) == 0

    def test_bench_over_dataset_root(self, tmp_path):
        root = tmp_path / "data"
        for name in ("s1", "s2"):
            save_sequence(synth_sequence(tiny_spec(num_frames=3, name=name)), root / name)
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("gn_iters = 1\ncg_iters = 8\n")
        out = tmp_path / "bench_out"
        code = cli.main(
            ["bench", str(root), "--config", str(cfg), "--out", str(out),
             "--sequences", "s1,s2", "--jobs", "2"]
        )
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["aggregate"]["sequences"] == 2

    def test_bench_reports_missing_sequences(self, tmp_path):
        root = tmp_path / "data"
        save_sequence(synth_sequence(tiny_spec(num_frames=3, name="s1")), root / "s1")
        code = cli.main(["bench", str(root), "--sequences", "s1,ghost"])
        assert code == 1

    def test_errors_exit_nonzero(self, tmp_path):
        assert cli.main(["track", str(tmp_path / "missing")]) == 1
        assert cli.main(["report", str(tmp_path)]) == 1
