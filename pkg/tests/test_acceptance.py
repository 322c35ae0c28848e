"""Release gate: one test per acceptance criterion.

Each test prints a single [PASS] or [FAIL] line (with its runtime) so a
full run yields a one-line verdict per criterion. Stated tolerances and
runtime bounds are asserted inside the tests themselves.
"""

from __future__ import annotations

import contextlib
import hashlib
import json
import math
import threading
import time
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient

from handmend.backends import (
    BackendSet,
    FixtureDetector,
    FixturePoseEstimator,
    HandDetection,
    HandLabel,
    HashPatternInpainter,
    MockInstructionEditor,
)
from handmend.cli import main as cli_main
from handmend.evaluation import (
    REPORTED_DETECTION_OUTCOMES,
    feature_distribution,
    fid,
    iou,
    match_and_count,
    precision_recall,
)
from handmend.geometry import (
    Chirality,
    HandLandmarkSet,
    Point2,
    RotationDirection,
    apply_placement,
    compute_chirality,
    cross,
    solve_placement,
)
from handmend.masking import (
    BoundingBox,
    MaskLayer,
    expand_box,
    rasterize_box,
    union_masks,
)
from handmend.pipeline import STEPS, PipelineSession, SessionParams
from handmend.prompts import (
    DEFAULT_PROMPTS,
    INSTRUCTION_PROMPT,
    NEGATIVE_PROMPT,
)
from handmend.dataset import (
    HandAnnotation,
    ImagePair,
    parse_annotations,
    serialize_annotations,
    split_pairs,
)
from handmend.service import ServiceConfig, create_app
from handmend.templates import TemplateSpec

from conftest import make_image, png_bytes
from test_evaluation import _brute_force_counts


@pytest.fixture
def criterion(capsys):
    @contextlib.contextmanager
    def _criterion(name: str):
        start = time.perf_counter()
        try:
            yield
        except BaseException:
            with capsys.disabled():
                print(f"[FAIL] {name}")
            raise
        elapsed = time.perf_counter() - start
        with capsys.disabled():
            print(f"[PASS] {name} ({elapsed:.2f}s)")

    return _criterion


def _mock_backends() -> BackendSet:
    return BackendSet(
        detector=FixtureDetector(),
        pose_estimator=FixturePoseEstimator(),
        control_inpainter=HashPatternInpainter(),
        instruction_inpainter=MockInstructionEditor(),
    )


def _hand(coords, source="pose-estimate") -> HandLandmarkSet:
    ax, ay, bx, by, cx, cy, dx, dy = coords
    return HandLandmarkSet(
        a=Point2(ax, ay), b=Point2(bx, by), c=Point2(cx, cy), d=Point2(dx, dy),
        source=source,
    )


_TEMPLATE_RASTER = np.zeros((200, 200, 3), dtype=np.uint8)


def _template(coords) -> TemplateSpec:
    return TemplateSpec(
        name="probe",
        raster=_TEMPLATE_RASTER,
        landmarks=_hand(coords, source="template-annotation"),
    )


def _nondegenerate_rows(coords: np.ndarray) -> np.ndarray:
    v1 = coords[:, 4:6] - coords[:, 0:2]
    v2 = coords[:, 6:8] - coords[:, 2:4]
    n1 = np.linalg.norm(v1, axis=1)
    n2 = np.linalg.norm(v2, axis=1)
    crossed = v1[:, 0] * v2[:, 1] - v1[:, 1] * v2[:, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        normalized = np.abs(crossed) / (n1 * n2)
    return (n1 > 1.0) & (n2 > 1.0) & (normalized > 1e-3)


def _sample_pairs(count: int, seed: int):
    rng = np.random.default_rng(seed)
    pairs = []
    while len(pairs) < count:
        hands = rng.uniform(-500.0, 500.0, size=(count, 8))
        templates = rng.uniform(0.0, 200.0, size=(count, 8))
        keep = _nondegenerate_rows(hands) & _nondegenerate_rows(templates)
        for hand_row, template_row in zip(hands[keep], templates[keep]):
            pairs.append((hand_row, template_row))
            if len(pairs) == count:
                break
    return pairs


def test_01_table_reproduction(criterion):
    with criterion(
        "table reproduction: 2-dp precision/recall for IOU 0.80/0.90/0.95, "
        "0.85 recall flagged, < 1 s"
    ):
        start = time.perf_counter()
        expected = {
            0.80: (0.89, 0.85),
            0.90: (0.81, 0.68),
            0.95: (0.63, 0.44),
        }
        for row in REPORTED_DETECTION_OUTCOMES:
            precision, recall = precision_recall(row.counts())
            if row.iou_threshold in expected:
                want_p, want_r = expected[row.iou_threshold]
                assert round(precision, 2) == want_p
                assert round(recall, 2) == want_r
                assert row.recall_matches_arithmetic
            else:
                assert row.iou_threshold == 0.85
                assert round(precision, 2) == 0.86 == row.reported_precision
                assert round(recall, 2) == 0.80
                assert row.reported_recall == 0.86
                assert not row.recall_matches_arithmetic
        assert time.perf_counter() - start < 1.0


def test_02_geometry_suite(criterion):
    with criterion(
        "geometry: 10,000 random pairs round-trip within 1e-6 relative, "
        "chirality mirror/scale properties, < 10 s"
    ):
        start = time.perf_counter()
        for hand_row, template_row in _sample_pairs(10_000, seed=20260815):
            hand = _hand(hand_row)
            template = _template(template_row)
            chirality = compute_chirality(hand)
            transform = solve_placement(hand, chirality, template)
            for template_point, hand_point in (
                (template.landmarks.a, hand.a),
                (template.landmarks.c, hand.c),
            ):
                mapped = apply_placement(transform, template_point)
                tolerance = 1e-6 * max(1.0, abs(hand_point.x), abs(hand_point.y))
                assert abs(mapped.x - hand_point.x) <= tolerance
                assert abs(mapped.y - hand_point.y) <= tolerance

            mirrored = _hand([-hand_row[0], hand_row[1], -hand_row[2], hand_row[3],
                              -hand_row[4], hand_row[5], -hand_row[6], hand_row[7]])
            assert compute_chirality(mirrored) is not chirality
            scaled = _hand(hand_row * 137.0)
            assert compute_chirality(scaled) is chirality
        assert time.perf_counter() - start < 10.0


def test_03_rotation_convention_pin(criterion):
    with criterion(
        "rotation pin: v1=(0,1)/v1'=(1,0) gives theta=pi/2 rotating v1' onto v1; "
        "sign rule holds on both signs"
    ):
        hand = _hand([0.0, 0.0, 0.3, 0.5, 0.0, 1.0, -0.3, 0.5])
        template = _template([0.0, 0.0, 0.5, 0.3, 1.0, 0.0, 0.5, 0.9])
        assert compute_chirality(hand) is Chirality.CCW
        assert template.chirality is Chirality.CCW
        transform = solve_placement(hand, Chirality.CCW, template)
        assert not transform.flipped
        assert transform.rotation_angle == pytest.approx(math.pi / 2, abs=1e-12)
        # matrix verification: the transform must carry c_t onto c, i.e.
        # rotate v1'=(1,0) onto v1=(0,1)
        mapped_c = apply_placement(transform, template.landmarks.c)
        assert mapped_c.x == pytest.approx(hand.c.x, abs=1e-12)
        assert mapped_c.y == pytest.approx(hand.c.y, abs=1e-12)

        # sign rule, positive side: cross(v1, v1') > 0 means clockwise
        cw_hand = _hand([0.0, 0.0, -3.0, -5.0, 0.0, -10.0, 3.0, -5.0])
        cw_template = _template([0.0, 0.0, 5.0, 3.0, 10.0, 0.0, 5.0, 9.0])
        positive = solve_placement(cw_hand, compute_chirality(cw_hand), cw_template)
        assert not positive.flipped
        assert cross(cw_hand.v1, cw_template.landmarks.v1) > 0
        assert positive.rotation_direction is RotationDirection.CLOCKWISE

        # negative side: cross(v1, v1') < 0 means counterclockwise
        ccw_hand = _hand([0.0, 0.0, -3.0, 5.0, 0.0, 10.0, 3.0, 5.0])
        ccw_template = _template([0.0, 3.0, 5.0, 9.0, 10.0, 3.0, 5.0, 0.0])
        negative = solve_placement(ccw_hand, compute_chirality(ccw_hand), ccw_template)
        assert not negative.flipped
        assert cross(ccw_hand.v1, ccw_template.landmarks.v1) < 0
        assert negative.rotation_direction is RotationDirection.COUNTERCLOCKWISE


def test_04_mask_suite(criterion, tmp_path):
    with criterion(
        "masks: union algebra on random masks, expand_box monotone over ratio "
        "grid, integer-box area exactness, union contains bbox mask in pipeline runs"
    ):
        rng = np.random.default_rng(7)
        for _ in range(20):
            bits = [rng.integers(0, 2, size=(13, 17)).astype(bool) for _ in range(3)]
            a, b, c = (MaskLayer(17, 13, layer) for layer in bits)
            assert union_masks([a, a]).bits.tolist() == a.bits.tolist()
            assert np.array_equal(union_masks([a, b]).bits, union_masks([b, a]).bits)
            assert np.array_equal(
                union_masks([union_masks([a, b]), c]).bits,
                union_masks([a, union_masks([b, c])]).bits,
            )

        box = BoundingBox(40, 30, 90, 80)
        previous = box
        for ratio in [0.0, 0.1, 0.25, 0.5, 0.75, 1.0]:
            grown = expand_box(box, ratio, 400, 400)
            assert grown.x1 <= previous.x1 and grown.y1 <= previous.y1
            assert grown.x2 >= previous.x2 and grown.y2 >= previous.y2
            previous = grown

        for x1, y1, w, h in ((0, 0, 5, 3), (2, 7, 10, 1), (13, 4, 3, 12)):
            mask = rasterize_box(BoundingBox(x1, y1, x1 + w, y1 + h), 32, 32)
            assert mask.on_count() == w * h

        for params in (SessionParams(), SessionParams(include_standard_hands=True),
                       SessionParams(bbox_expand_ratio=0.3)):
            session = PipelineSession.create(
                tmp_path / f"mask-{params.bbox_expand_ratio}-{params.include_standard_hands}",
                make_image(), params, _mock_backends(),
            )
            session.run_all()
            bbox_bits = MaskLayer.load(session.artifact_path("bbox_mask.png")).bits
            union_bits = MaskLayer.load(session.artifact_path("union_mask.png")).bits
            assert np.all(union_bits[bbox_bits])


def test_05_fid_oracle(criterion):
    with criterion(
        "fid: self-distance <= 1e-6, analytic 25 and 2 within 1e-8, Monte-Carlo "
        "within 10% (n=500, d=8), symmetry within 1e-8, < 30 s"
    ):
        start = time.perf_counter()
        rng = np.random.default_rng(5)
        sample = feature_distribution(list(rng.standard_normal((40, 6))))
        assert fid(sample, sample) <= 1e-6

        from handmend.evaluation import FeatureDistribution

        p = FeatureDistribution(np.array([0.0, 0.0]), np.eye(2), 10)
        q = FeatureDistribution(np.array([3.0, 4.0]), np.eye(2), 10)
        assert fid(p, q) == pytest.approx(25.0, abs=1e-8)
        scaled = FeatureDistribution(np.zeros(2), 4.0 * np.eye(2), 10)
        unit = FeatureDistribution(np.zeros(2), np.eye(2), 10)
        assert fid(scaled, unit) == pytest.approx(2.0, abs=1e-8)

        shift = np.ones(8)
        x = feature_distribution(list(rng.standard_normal((500, 8))))
        y = feature_distribution(list(rng.standard_normal((500, 8)) + shift))
        value = fid(x, y)
        analytic = float(shift @ shift)
        assert abs(value - analytic) / analytic <= 0.10
        assert fid(x, y) == pytest.approx(fid(y, x), abs=1e-8)
        assert time.perf_counter() - start < 30.0


def test_06_iou_matching_oracle(criterion):
    with criterion(
        "iou/matching: greedy equals brute force on random <=3x3 instances with "
        "distinct IOUs; iou((0,0,2,2),(1,1,3,3)) = 1/7 within 1e-12"
    ):
        assert iou(BoundingBox(0, 0, 2, 2), BoundingBox(1, 1, 3, 3)) == pytest.approx(
            1.0 / 7.0, abs=1e-12
        )
        rng = np.random.default_rng(99)
        checked = 0
        while checked < 250:
            n_pred = int(rng.integers(0, 4))
            n_gt = int(rng.integers(0, 4))
            threshold = float(rng.uniform(0.05, 0.9))
            preds = []
            for _ in range(n_pred):
                x1, y1 = rng.uniform(0, 6, size=2)
                w, h = rng.uniform(0.5, 4, size=2)
                preds.append(HandDetection(
                    box=BoundingBox(x1, y1, x1 + w, y1 + h),
                    label=HandLabel(int(rng.integers(0, 2))),
                    confidence=float(rng.uniform(0.05, 0.99)),
                ))
            gt = []
            for _ in range(n_gt):
                x1, y1 = rng.uniform(0, 6, size=2)
                w, h = rng.uniform(0.5, 4, size=2)
                gt.append((int(rng.integers(0, 2)), BoundingBox(x1, y1, x1 + w, y1 + h)))
            eligible = [
                iou(p.box, box) for p in preds for _, box in gt
                if iou(p.box, box) >= threshold
            ]
            if len(set(eligible)) != len(eligible):
                continue
            if len({p.confidence for p in preds}) != len(preds):
                continue
            assert match_and_count(preds, gt, threshold) == _brute_force_counts(
                preds, gt, threshold
            )
            checked += 1


def test_07_end_to_end_determinism(criterion, tmp_path):
    with criterion(
        "determinism: fixed-seed double run byte-identical; template change at "
        "step 3 leaves steps 1-2 artifacts byte-identical, < 20 s"
    ):
        start = time.perf_counter()

        def tree_hashes(directory: Path) -> dict[str, str]:
            return {
                str(p.relative_to(directory)): hashlib.sha256(p.read_bytes()).hexdigest()
                for p in sorted(directory.rglob("*"))
                if p.is_file() and p.name != "manifest.json"
            }

        params = SessionParams(seed=13)
        first = PipelineSession.create(tmp_path / "one", make_image(), params, _mock_backends())
        second = PipelineSession.create(tmp_path / "two", make_image(), params, _mock_backends())
        first.run_all()
        second.run_all()
        assert tree_hashes(first.directory) == tree_hashes(second.directory)

        upstream = {
            logical: first.artifact_path(logical).read_bytes()
            for logical in ("detections.json", "bbox_mask.png", "pose.json",
                            "skeleton_overlay.png")
        }
        first.set_params(first.params.replace(template_name="fist-back"))
        first.rerun_from("control")
        for logical, payload in upstream.items():
            assert first.artifact_path(logical).read_bytes() == payload
        placements = json.loads(first.artifact_path("placements.json").read_text("utf-8"))
        assert placements["template"] == "fist-back"
        assert time.perf_counter() - start < 20.0


def test_08_prompt_fidelity(criterion):
    with criterion(
        "prompts: opened-palm positive head, negative and instruction byte-exact, "
        "50 variants with pinned first entry"
    ):
        positive = DEFAULT_PROMPTS.render_positive("opened-palm")
        assert positive.startswith("opened-palm, hand, realskin, photorealistic, RAW photo")
        assert NEGATIVE_PROMPT == (
            "deformed, EasyNegative, paintings, sketches, (worst quality:2), "
            "(low quality:2), (normal quality:2), low-res, normal quality, "
            "and (monochrome)."
        )
        assert INSTRUCTION_PROMPT == "Turn the deformed hand into normal"
        assert len(DEFAULT_PROMPTS.instruction_variants) == 50
        assert DEFAULT_PROMPTS.variant(0) == (
            "Transform the distorted hand into a regular shape"
        )


def test_09_dataset_suite(criterion):
    with criterion(
        "dataset: split partition over random lists/seeds, parse/serialize "
        "round-trip, 90/10 of 10 pairs = 9/1"
    ):
        rng = np.random.default_rng(17)
        for _ in range(200):
            n = int(rng.integers(1, 40))
            pairs = [ImagePair(f"im{i:03d}", f"im{i:03d}_redrawn") for i in range(n)]
            fraction = float(rng.uniform(0.05, 0.95))
            seed = int(rng.integers(0, 2**31))
            train, test = split_pairs(pairs, fraction, seed)
            assert len(train) == round(fraction * n)
            assert sorted(train + test, key=lambda p: p.original_id) == pairs
            assert not set(train) & set(test)

        for _ in range(100):
            hands = [
                HandAnnotation(
                    label=int(rng.integers(0, 2)),
                    cx=float(rng.uniform(0, 1)),
                    cy=float(rng.uniform(0, 1)),
                    w=float(rng.uniform(1e-4, 1)),
                    h=float(rng.uniform(1e-4, 1)),
                )
                for _ in range(int(rng.integers(0, 6)))
            ]
            once = serialize_annotations(hands)
            assert serialize_annotations(parse_annotations(once)) == once

        train, test = split_pairs(
            [ImagePair(f"p{i}", f"p{i}_redrawn") for i in range(10)], 0.9, seed=1
        )
        assert (len(train), len(test)) == (9, 1)


def test_10_service_conformance(criterion, tmp_path):
    with criterion(
        "service: CLI and API artifact hashes identical; 409 on order, 423 on "
        "busy, 410 on expiry"
    ):
        image_path = tmp_path / "input.png"
        image_path.write_bytes(png_bytes(make_image()))
        cli_dir = tmp_path / "cli-session"
        assert cli_main([
            "run", "--image", str(image_path), "--seed", "33", "--out", str(cli_dir),
        ]) == 0

        config = ServiceConfig(artifact_root=tmp_path / "api-sessions")
        client = TestClient(create_app(config, backends=_mock_backends()))
        created = client.post(
            "/sessions",
            files={"image": ("input.png", image_path.read_bytes(), "image/png")},
            data={"params": json.dumps({"seed": 33})},
        )
        assert created.status_code == 201
        session_id = created.json()["id"]
        for step in STEPS:
            assert client.post(f"/sessions/{session_id}/steps/{step}").status_code == 200
        artifacts = client.get(f"/sessions/{session_id}").json()["artifacts"]
        cli_session = PipelineSession.load(cli_dir, _mock_backends())
        for logical, stored in cli_session.current_artifacts().items():
            api_bytes = client.get(artifacts[logical]).content
            cli_bytes = (cli_dir / "artifacts" / stored).read_bytes()
            assert hashlib.sha256(api_bytes).hexdigest() == hashlib.sha256(
                cli_bytes
            ).hexdigest(), logical

        fresh = client.post(
            "/sessions", files={"image": ("input.png", image_path.read_bytes(), "image/png")}
        ).json()["id"]
        assert client.post(f"/sessions/{fresh}/steps/control").status_code == 409

        class Gated(HashPatternInpainter):
            def __init__(self):
                super().__init__()
                self.started = threading.Event()
                self.release = threading.Event()

            def inpaint(self, request):
                self.started.set()
                assert self.release.wait(timeout=10.0)
                return super().inpaint(request)

        gated = Gated()
        busy_backends = BackendSet(
            detector=FixtureDetector(),
            pose_estimator=FixturePoseEstimator(),
            control_inpainter=gated,
            instruction_inpainter=MockInstructionEditor(),
        )
        busy_client = TestClient(create_app(
            ServiceConfig(artifact_root=tmp_path / "busy-sessions", async_steps=True),
            backends=busy_backends,
        ))
        busy_id = busy_client.post(
            "/sessions", files={"image": ("in.png", image_path.read_bytes(), "image/png")}
        ).json()["id"]
        for step in ("detect", "pose", "control"):
            busy_client.post(f"/sessions/{busy_id}/steps/{step}")
            deadline = time.monotonic() + 10
            while time.monotonic() < deadline:
                body = busy_client.get(f"/sessions/{busy_id}/steps/{step}").json()
                if body["state"] == "idle" and body["status"] == "done":
                    break
                time.sleep(0.02)
        assert busy_client.post(f"/sessions/{busy_id}/steps/controlnet").status_code == 202
        assert gated.started.wait(timeout=10)
        assert busy_client.post(f"/sessions/{busy_id}/steps/controlnet").status_code == 423
        gated.release.set()

        ttl_client = TestClient(create_app(
            ServiceConfig(artifact_root=tmp_path / "ttl-sessions", session_ttl=0.05),
            backends=_mock_backends(),
        ))
        ttl_id = ttl_client.post(
            "/sessions", files={"image": ("in.png", image_path.read_bytes(), "image/png")}
        ).json()["id"]
        time.sleep(0.1)
        assert ttl_client.get(f"/sessions/{ttl_id}").status_code == 410
        assert ttl_client.get(f"/sessions/{ttl_id}").status_code == 410
