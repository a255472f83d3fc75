"""
Tests for detection evaluation: parsing, greedy matching, PR curves and AP.
"""

import itertools

import numpy as np
import pytest

from maskwatch.base.exceptions import DataFormatError, EmptyCurve, NoGroundTruth, ValidationError
from maskwatch.eval import (
    REFERENCE_AP,
    APResult,
    Detection,
    DetectionSet,
    Difficulty,
    GroundTruthBox,
    GroundTruthSet,
    PRCurve,
    SubsetMode,
    average_precision,
    brute_force_ap,
    evaluate,
    evaluate_curves,
    export_pr_csv,
    load_detections,
    load_ground_truth,
    load_pr_csv,
    match,
    parse_detections,
    parse_ground_truth,
    pr_curve,
    subset_difficulties,
)
from maskwatch.geometry import BoundingBox


def box(x, y, w=10.0, h=10.0):
    return BoundingBox(x=x, y=y, w=w, h=h)


def gts(**images):
    """``gts(img1=[((x, y), "easy"), ...])``"""
    return GroundTruthSet(
        {
            image_id: tuple(GroundTruthBox(box=box(*xy), difficulty=Difficulty(d)) for xy, d in rows)
            for image_id, rows in images.items()
        }
    )


def dets(**images):
    """``dets(img1=[((x, y), score), ...])``"""
    return DetectionSet(
        {
            image_id: tuple(Detection(box=box(*xy), score=s) for xy, s in rows)
            for image_id, rows in images.items()
        }
    )


def random_instance(rng, images=6):
    """Scattered ground truth with jittered, duplicated and spurious detections."""
    truth, found = {}, {}
    for i in range(images):
        image_id = f"img{i}"
        rows, det_rows = [], []
        for j in range(int(rng.integers(0, 5))):
            xy = (j * 40.0, float(rng.integers(0, 3)) * 40.0)
            rows.append((xy, str(rng.choice(["easy", "medium", "hard"]))))
            if rng.random() < 0.7:
                jitter = (xy[0] + float(rng.uniform(-3, 3)), xy[1] + float(rng.uniform(-3, 3)))
                det_rows.append((jitter, float(rng.uniform(0.05, 1.0))))
            if rng.random() < 0.2:
                det_rows.append((xy, float(rng.uniform(0.05, 1.0))))
        for _ in range(int(rng.integers(0, 3))):
            det_rows.append(((float(rng.uniform(300, 400)), 300.0), float(rng.uniform(0.05, 1.0))))
        truth[image_id] = rows
        found[image_id] = det_rows
    return dets(**found), gts(**truth)


class TestParsing:
    """Test the WIDER-style block formats."""

    def test_fixture_files(self, ap_fixture_paths):
        gt_path, det_path = ap_fixture_paths
        truth = load_ground_truth(gt_path)
        found = load_detections(det_path)
        assert len(truth) == 2
        assert [g.difficulty for g in truth.boxes("img1")] == [Difficulty.EASY, Difficulty.HARD]
        assert [d.score for _, d in found.flat()] == [0.9, 0.8, 0.7]

    def test_zero_count_block(self):
        truth = parse_ground_truth("img1\n0\nimg2\n1\n0 0 10 10 medium\n")
        assert truth.boxes("img1") == ()
        assert truth.count(frozenset({Difficulty.MEDIUM})) == 1

    @pytest.mark.parametrize(
        "text,line",
        [
            ("img1\n1\n0 0 10 10 easy\nimg1\n0\n", 4),
            ("img1\n", 1),
            ("img1\n-1\n", 2),
            ("img1\ntwo\n", 2),
            ("img1\n2\n0 0 10 10 easy\n", 3),
            ("img1\n1\n0 0 10 easy\n", 3),
            ("img1\n1\n0 0 10 10 tricky\n", 3),
            ("img1\n1\n0 0 0 10 easy\n", 3),
        ],
    )
    def test_ground_truth_errors(self, text, line):
        with pytest.raises(DataFormatError) as exc:
            parse_ground_truth(text)
        assert exc.value.line_number == line

    @pytest.mark.parametrize("score", ["1.5", "-0.1", "nan", "high"])
    def test_detection_score_errors(self, score):
        with pytest.raises(DataFormatError) as exc:
            parse_detections(f"# header\nimg1\n1\n0 0 10 10 {score}\n")
        assert exc.value.line_number == 4


class TestMatch:
    """Test greedy matching."""

    def test_exact_overlap_is_tp(self):
        result = match(dets(img1=[((0, 0), 0.9)]), gts(img1=[((0, 0), "easy")]))
        assert result.tp.tolist() == [True]
        assert result.gt_matched == {"img1": (True,)}

    def test_double_detection_penalized(self):
        result = match(
            dets(img1=[((1, 0), 0.8), ((0, 0), 0.9)]),
            gts(img1=[((0, 0), "easy")]),
        )
        assert result.scores.tolist() == [0.9, 0.8]
        assert result.tp.tolist() == [True, False]
        assert result.fp.tolist() == [False, True]

    def test_detection_in_image_without_ground_truth(self):
        result = match(dets(other=[((0, 0), 0.9)]), gts(img1=[((0, 0), "easy")]))
        assert result.tp.tolist() == [False]
        assert result.gt_matched == {"img1": (False,)}

    def test_below_threshold_is_fp(self):
        # IoU 1/3
        result = match(dets(img1=[((5, 0), 0.9)]), gts(img1=[((0, 0), "easy")]))
        assert result.tp.tolist() == [False]
        assert match(
            dets(img1=[((5, 0), 0.9)]), gts(img1=[((0, 0), "easy")]), iou_threshold=0.3
        ).tp.tolist() == [True]

    def test_highest_iou_ground_truth_wins(self):
        result = match(
            dets(img1=[((4, 0), 0.9)]),
            gts(img1=[((0, 0), "easy"), ((5, 0), "easy")]),
            iou_threshold=0.3,
        )
        assert result.gt_matched["img1"] == (False, True)

    def test_iou_tie_takes_earliest_ground_truth(self):
        result = match(dets(img1=[((0, 0), 0.9)]), gts(img1=[((0, 0), "easy"), ((0, 0), "hard")]))
        assert result.gt_matched["img1"] == (True, False)

    def test_score_tie_takes_input_order(self):
        result = match(
            dets(img1=[((1, 1), 0.5), ((0, 0), 0.5)]),
            gts(img1=[((0, 0), "easy")]),
        )
        # both overlap enough; the first listed claims the box
        assert result.tp.tolist() == [True, False]

    def test_detection_on_inactive_ground_truth_is_false_positive(self):
        result = match(
            dets(img1=[((0, 0), 0.9)]),
            gts(img1=[((0, 0), "hard")]),
            allowed=frozenset({Difficulty.EASY}),
        )
        assert result.num_gt == 0
        assert result.tp.tolist() == [False]

    @pytest.mark.parametrize("threshold", [0.0, 1.0, -0.2, 1.5])
    def test_threshold_range(self, threshold):
        with pytest.raises(ValidationError):
            match(dets(), gts(), iou_threshold=threshold)

    def test_workers_do_not_change_result(self, rng):
        found, truth = random_instance(rng, images=12)
        serial = match(found, truth)
        parallel = match(found, truth, workers=4)
        assert np.array_equal(serial.scores, parallel.scores)
        assert np.array_equal(serial.tp, parallel.tp)
        assert serial.gt_matched == parallel.gt_matched

    def test_invalid_workers(self):
        with pytest.raises(ValidationError):
            match(dets(), gts(), workers=0)


class TestPRCurve:
    """Test cumulative precision and recall."""

    def test_single_tp(self):
        assert pr_curve([True], 1).points == ((1.0, 1.0),)

    def test_tp_fp(self):
        assert pr_curve([True, False], 1).points == ((1.0, 1.0), (1.0, 0.5))

    def test_tp_fp_tp(self):
        curve = pr_curve([True, False, True], 2)
        assert curve.recall.tolist() == [0.5, 0.5, 1.0]
        assert curve.precision.tolist() == pytest.approx([1.0, 0.5, 2 / 3])

    def test_no_ground_truth(self):
        with pytest.raises(NoGroundTruth):
            pr_curve([True], 0)

    def test_validation(self):
        with pytest.raises(ValidationError):
            PRCurve(((0.5, 1.0), (0.25, 1.0)))
        with pytest.raises(ValidationError):
            PRCurve(((0.5, 1.5),))


class TestAveragePrecision:
    """Test the envelope integration and its brute-force reference."""

    def test_perfect(self):
        assert average_precision(PRCurve(((1.0, 1.0),))) == 1.0

    def test_fp_after_full_recall(self):
        assert average_precision(PRCurve(((1.0, 1.0), (1.0, 0.5)))) == 1.0

    def test_hand_integration(self):
        curve = PRCurve(((0.5, 1.0), (0.5, 0.5), (1.0, 0.6667)))
        assert average_precision(curve) == pytest.approx(0.83335)

    def test_empty_curve(self):
        with pytest.raises(EmptyCurve):
            average_precision(PRCurve(()))

    def test_all_false_positives(self):
        assert average_precision(pr_curve([False, False], 3)) == 0.0

    def test_matches_brute_force_exhaustively(self):
        checked = 0
        for length in range(1, 7):
            scores = [1.0 - 0.1 * i for i in range(length)]
            for flags in itertools.product([True, False], repeat=length):
                for num_gt in range(max(1, sum(flags)), 5):
                    fast = average_precision(pr_curve(flags, num_gt))
                    slow = brute_force_ap(scores, flags, num_gt)
                    assert fast == pytest.approx(slow, abs=1e-12), (flags, num_gt)
                    checked += 1
        assert checked > 300

    def test_brute_force_errors(self):
        with pytest.raises(NoGroundTruth):
            brute_force_ap([0.5], [True], 0)
        with pytest.raises(ValidationError):
            brute_force_ap([0.5, 0.4], [True], 1)


class TestEvaluate:
    """Test AP per difficulty subset."""

    def test_fixture(self, ap_fixture_paths):
        gt_path, det_path = ap_fixture_paths
        result = evaluate(load_detections(det_path), load_ground_truth(gt_path))
        assert result.format_row() == "1.000 1.000 0.833"

    def test_fixture_disjoint(self, ap_fixture_paths):
        gt_path, det_path = ap_fixture_paths
        result = evaluate(
            load_detections(det_path), load_ground_truth(gt_path), subset_mode=SubsetMode.DISJOINT
        )
        assert result.easy == 1.0
        assert result.medium is None
        assert result.hard == pytest.approx(1 / 3)

    def test_all_easy_perfect(self):
        truth = gts(img1=[((0, 0), "easy"), ((40, 0), "easy")], img2=[((0, 40), "easy")])
        found = dets(img1=[((0, 0), 0.9), ((40, 0), 0.8)], img2=[((0, 40), 0.7)])
        assert evaluate(found, truth) == APResult(1.0, 1.0, 1.0)

    def test_hard_missed(self):
        truth = gts(img1=[((0, 0), "easy"), ((50, 50), "hard")])
        result = evaluate(dets(img1=[((0, 0), 0.9)]), truth)
        assert (result.easy, result.medium, result.hard) == (1.0, 1.0, 0.5)

    def test_subset_without_ground_truth(self):
        result = evaluate(dets(img1=[((0, 0), 0.9)]), gts(img1=[((0, 0), "hard")]))
        assert result.easy is None
        assert result.medium is None
        assert result.hard == 1.0
        assert result.format_row() == "- - 1.000"

    def test_no_detections_scores_zero(self):
        result = evaluate(dets(), gts(img1=[((0, 0), "easy")]))
        assert result == APResult(0.0, 0.0, 0.0)

    def test_all_easy_subsets_agree(self, rng):
        found, truth = random_instance(rng)
        easy_only = GroundTruthSet(
            {
                k: tuple(g.model_copy(update={"difficulty": Difficulty.EASY}) for g in v)
                for k, v in truth.images.items()
            }
        )
        result = evaluate(found, easy_only)
        assert result.easy == result.medium == result.hard

    def test_cumulative_subsets_nest(self):
        assert subset_difficulties(Difficulty.EASY, SubsetMode.CUMULATIVE) == {Difficulty.EASY}
        assert subset_difficulties(Difficulty.HARD, SubsetMode.CUMULATIVE) == set(Difficulty)
        assert subset_difficulties(Difficulty.MEDIUM, SubsetMode.DISJOINT) == {Difficulty.MEDIUM}

    def test_monotone_score_transform(self, rng):
        for _ in range(10):
            found, truth = random_instance(rng)
            cubed = DetectionSet(
                {
                    k: tuple(d.model_copy(update={"score": d.score**3}) for d in v)
                    for k, v in found.images.items()
                }
            )
            assert evaluate(cubed, truth) == evaluate(found, truth)

    def test_low_false_positive_never_helps(self, rng):
        for _ in range(10):
            found, truth = random_instance(rng)
            lowest = min((d.score for _, d in found.flat()), default=1.0)
            extra = dict(found.images)
            extra["img0"] = (*extra.get("img0", ()), Detection(box=box(900, 900), score=lowest / 2))
            before = evaluate(found, truth)
            after = evaluate(DetectionSet(extra), truth)
            for subset in Difficulty:
                if before.get(subset) is not None:
                    assert after.get(subset) <= before.get(subset)

    def test_curves_per_subset(self, ap_fixture_paths):
        gt_path, det_path = ap_fixture_paths
        curves = evaluate_curves(load_detections(det_path), load_ground_truth(gt_path))
        assert curves[Difficulty.HARD].recall.tolist() == [0.5, 0.5, 1.0]
        assert len(curves[Difficulty.EASY]) == 3

    def test_reference_values(self):
        assert REFERENCE_AP.format_row() == "0.972 0.965 0.925"


class TestPRExport:
    """Test the recall,precision CSV."""

    def test_single_point(self, tmp_path):
        out = tmp_path / "pr.csv"
        export_pr_csv(pr_curve([True], 1), out)
        assert out.read_text().splitlines() == ["recall,precision", "1.000000,1.000000"]

    def test_three_rows(self, tmp_path):
        out = tmp_path / "pr.csv"
        curve = pr_curve([True, False, True], 2)
        export_pr_csv(curve, out)
        assert out.read_text().splitlines()[1:] == [
            "0.500000,1.000000",
            "0.500000,0.500000",
            "1.000000,0.666667",
        ]
        loaded = load_pr_csv(out)
        assert np.allclose(loaded.recall, curve.recall, atol=1e-6)
        assert np.allclose(loaded.precision, curve.precision, atol=1e-6)

    def test_empty_curve_refused(self, tmp_path):
        with pytest.raises(EmptyCurve):
            export_pr_csv(PRCurve(()), tmp_path / "pr.csv")

    def test_bad_header(self, tmp_path):
        out = tmp_path / "pr.csv"
        out.write_text("r,p\n1,1\n")
        with pytest.raises(DataFormatError):
            load_pr_csv(out)
