"""LBPH extraction and matching against independent per-pixel oracles."""

import numpy as np
import pytest

from faceassist.imaging import GrayImage
from faceassist.lbph import (
    LbpParams,
    ModelEntry,
    RecognizerModel,
    chi_square_distance,
    extract_template,
    lbp_code,
    lbp_image,
    load_model_json,
    nearest,
    predict,
    save_model_json,
    spatial_histogram,
    train,
)

from conftest import random_image, synthetic_face

SMALL = LbpParams(grid_x=2, grid_y=2, face_w=16, face_h=16)


def oracle_lbp(img: GrayImage) -> np.ndarray:
    """Independent 8-comparison LBP oracle, written out longhand."""
    px = img.pixels.astype(int)
    h, w = px.shape
    out = np.zeros((h - 2, w - 2), np.uint8)
    for y in range(1, h - 1):
        for x in range(1, w - 1):
            c = px[y, x]
            bits = [
                c >= px[y - 1, x - 1],
                c >= px[y - 1, x],
                c >= px[y - 1, x + 1],
                c >= px[y, x + 1],
                c >= px[y + 1, x + 1],
                c >= px[y + 1, x],
                c >= px[y + 1, x - 1],
                c >= px[y, x - 1],
            ]
            code = 0
            for bit in bits:
                code = (code << 1) | int(bit)
            out[y - 1, x - 1] = code
    return out


class TestLbpCode:
    def test_constant_neighbourhood_is_255(self):
        img = GrayImage.constant(3, 3, 42)
        assert lbp_code(img, 1, 1) == 255

    def test_dark_center_is_zero(self):
        px = np.full((3, 3), 255, np.uint8)
        px[1, 1] = 0
        assert lbp_code(GrayImage.from_array(px), 1, 1) == 0

    def test_hand_derived_gradient_patch(self):
        img = GrayImage(3, 3, [10, 20, 30, 40, 50, 60, 70, 80, 90])
        assert lbp_code(img, 1, 1) == 0b11100001 == 225

    @pytest.mark.parametrize("x,y", [(0, 1), (1, 0), (2, 1), (1, 2)])
    def test_border_rejected(self, x, y):
        img = GrayImage.constant(3, 3, 1)
        with pytest.raises(ValueError):
            lbp_code(img, x, y)


class TestLbpImage:
    def test_output_size(self):
        assert lbp_image(GrayImage.constant(3, 3, 0)).width == 1
        out = lbp_image(GrayImage.constant(10, 7, 0))
        assert (out.width, out.height) == (8, 5)

    def test_constant_image_all_255(self):
        out = lbp_image(GrayImage.constant(6, 6, 17))
        assert (out.pixels == 255).all()

    def test_too_small(self):
        with pytest.raises(ValueError):
            lbp_image(GrayImage.constant(2, 3, 0))

    def test_matches_oracle(self):
        rng = np.random.default_rng(23)
        for _ in range(100):
            img = random_image(rng, 20, min_side=3)
            assert np.array_equal(lbp_image(img).pixels, oracle_lbp(img))


def oracle_spatial_histogram(codes: GrayImage, params: LbpParams) -> np.ndarray:
    """Double-loop region/count oracle."""
    arr = codes.pixels
    h, w = arr.shape
    chunks = []
    for ry in range(params.grid_y):
        for rx in range(params.grid_x):
            y0, y1 = ry * h // params.grid_y, (ry + 1) * h // params.grid_y
            x0, x1 = rx * w // params.grid_x, (rx + 1) * w // params.grid_x
            hist = np.zeros(256)
            count = 0
            for y in range(y0, y1):
                for x in range(x0, x1):
                    hist[arr[y, x]] += 1
                    count += 1
            chunks.append(hist / count)
    return np.concatenate(chunks)


class TestSpatialHistogram:
    def test_constant_codes_give_one_hot_regions(self):
        codes = GrayImage.constant(12, 12, 77)
        hist = spatial_histogram(codes, SMALL)
        hist = hist.reshape(4, 256)
        for region in hist:
            assert region[77] == 1.0
            assert region.sum() == 1.0

    def test_single_region_is_plain_histogram(self):
        params = LbpParams(grid_x=1, grid_y=1, face_w=8, face_h=8)
        codes = GrayImage(2, 2, [3, 3, 5, 7])
        hist = spatial_histogram(codes, params)
        assert hist[3] == 0.5 and hist[5] == 0.25 and hist[7] == 0.25

    def test_matches_oracle(self):
        rng = np.random.default_rng(29)
        for _ in range(30):
            params = LbpParams(
                grid_x=int(rng.integers(1, 5)),
                grid_y=int(rng.integers(1, 5)),
                face_w=16,
                face_h=16,
            )
            w = int(rng.integers(params.grid_x, 20))
            h = int(rng.integers(params.grid_y, 20))
            codes = GrayImage(w, h, rng.integers(0, 256, (h, w), dtype=np.uint8))
            got = spatial_histogram(codes, params)
            assert np.allclose(got, oracle_spatial_histogram(codes, params), atol=0)

    def test_every_region_sums_to_one(self):
        rng = np.random.default_rng(33)
        codes = random_image(rng, 40, min_side=8)
        hist = spatial_histogram(codes, LbpParams())
        sums = hist.reshape(-1, 256).sum(axis=1)
        assert np.allclose(sums, 1.0, atol=1e-9)

    def test_too_small(self):
        with pytest.raises(ValueError):
            spatial_histogram(GrayImage.constant(3, 3, 0), LbpParams())


class TestChiSquare:
    def test_identical_is_zero(self):
        rng = np.random.default_rng(4)
        t = rng.random(512)
        assert chi_square_distance(t, t) == 0.0

    def test_disjoint_one_hots(self):
        a = np.zeros(256)
        b = np.zeros(256)
        a[0] = 1.0
        b[9] = 1.0
        assert chi_square_distance(a, b) == 2.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            chi_square_distance(np.zeros(4), np.zeros(8))

    def test_symmetry_and_nonnegativity(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            a = rng.random(256)
            b = rng.random(256)
            assert chi_square_distance(a, b) == chi_square_distance(b, a)
            assert chi_square_distance(a, b) >= 0.0
            assert chi_square_distance(a, a) == 0.0


class TestExtractTemplate:
    def test_constant_face_one_hot_at_255(self):
        t = extract_template(GrayImage.constant(20, 20, 50), SMALL)
        regions = t.reshape(-1, 256)
        assert (regions[:, 255] == 1.0).all()

    def test_deterministic(self):
        face = synthetic_face(1)
        a = extract_template(face, SMALL)
        b = extract_template(face, SMALL)
        assert np.array_equal(a, b)

    def test_default_template_length(self):
        t = extract_template(synthetic_face(2))
        assert t.shape == (8 * 8 * 256,)

    def test_intensity_shift_invariance(self):
        rng = np.random.default_rng(8)
        px = rng.integers(0, 200, (32, 32), dtype=np.uint8)
        base = extract_template(GrayImage.from_array(px), SMALL)
        shifted = extract_template(GrayImage.from_array(px + 40), SMALL)
        assert np.array_equal(base, shifted)


class TestTrainPredict:
    def test_single_face_model(self):
        model = train([(synthetic_face(0), "ana")], SMALL)
        assert len(model.entries) == 1
        assert model.entries[0].label == "ana"

    def test_copies_share_templates(self):
        face = synthetic_face(3)
        model = train([(face, "a"), (face, "b"), (face, "c")], SMALL)
        assert np.array_equal(model.entries[0].template, model.entries[1].template)
        assert [e.label for e in model.entries] == ["a", "b", "c"]

    def test_empty_train_rejected(self):
        with pytest.raises(ValueError):
            train([], SMALL)

    def test_self_match_distance_zero(self):
        faces = [(synthetic_face(i), f"p{i}") for i in range(4)]
        model = train(faces, SMALL)
        for face, label in faces:
            result = predict(model, face)
            assert result.label == label
            assert result.distance == 0.0
            assert result.is_known

    def test_empty_model_rejected(self):
        model = RecognizerModel(SMALL, ())
        with pytest.raises(ValueError):
            predict(model, synthetic_face(0))

    def test_matches_exhaustive_oracle(self):
        rng = np.random.default_rng(44)
        faces = [(synthetic_face(i), f"p{i}") for i in range(4)]
        model = train(faces, SMALL)
        for _ in range(60):
            query = random_image(rng, 48, min_side=18)
            got = predict(model, query)
            q = extract_template(query, SMALL)
            dists = [chi_square_distance(e.template, q) for e in model.entries]
            best = min(range(len(dists)), key=lambda i: (dists[i], i))
            assert got.label == model.entries[best].label
            assert got.distance == dists[best]


class TestInvariances:
    def test_bit_convention_invariance(self):
        # Complementing every code (the neighbour-vs-center convention)
        # permutes histogram bins the same way in templates and queries, so
        # labels and distances are unchanged.
        params = SMALL

        def extract(face, complement):
            from faceassist.imaging import resize_bilinear

            canon = resize_bilinear(face, params.face_w, params.face_h)
            codes = lbp_image(canon)
            if complement:
                codes = GrayImage(codes.width, codes.height, 255 - codes.pixels)
            return spatial_histogram(codes, params)

        rng = np.random.default_rng(77)
        faces = [(synthetic_face(i), f"p{i}") for i in range(4)]
        model_a = RecognizerModel(
            params, tuple(ModelEntry(l, extract(f, False)) for f, l in faces)
        )
        model_b = RecognizerModel(
            params, tuple(ModelEntry(l, extract(f, True)) for f, l in faces)
        )
        for _ in range(20):
            query = random_image(rng, 40, min_side=18)
            ra = nearest(model_a, extract(query, False))
            rb = nearest(model_b, extract(query, True))
            assert ra.label == rb.label
            assert abs(ra.distance - rb.distance) <= 1e-12

    def test_bin_permutation_invariance(self):
        rng = np.random.default_rng(91)
        faces = [(synthetic_face(i), f"p{i}") for i in range(4)]
        model = train(faces, SMALL)
        perm = rng.permutation(256)
        full_perm = np.concatenate(
            [perm + 256 * r for r in range(SMALL.grid_x * SMALL.grid_y)]
        )
        permuted = RecognizerModel(
            SMALL,
            tuple(ModelEntry(e.label, e.template[full_perm]) for e in model.entries),
        )
        for _ in range(20):
            query = extract_template(random_image(rng, 40, min_side=18), SMALL)
            ra = nearest(model, query)
            rb = nearest(permuted, query[full_perm])
            assert ra.label == rb.label
            assert abs(ra.distance - rb.distance) <= 1e-12


class TestSerialization:
    def test_model_round_trip(self):
        model = train([(synthetic_face(i), f"p{i}") for i in range(3)], SMALL)
        loaded = load_model_json(save_model_json(model))
        assert loaded.params == model.params
        assert [e.label for e in loaded.entries] == [e.label for e in model.entries]
        for a, b in zip(loaded.entries, model.entries):
            assert np.array_equal(a.template, b.template)

    def test_length_mismatch_rejected(self):
        model = train([(synthetic_face(0), "x")], SMALL)
        doc = save_model_json(model).decode()
        doc = doc.replace('"gridX": 2', '"gridX": 3')
        with pytest.raises(ValueError):
            load_model_json(doc.encode())


class TestParams:
    def test_grid_must_fit_face(self):
        with pytest.raises(ValueError):
            LbpParams(grid_x=8, grid_y=8, face_w=8, face_h=8)

    def test_defaults(self):
        p = LbpParams()
        assert (p.grid_x, p.grid_y, p.face_w, p.face_h) == (8, 8, 100, 100)
        assert p.unknown_threshold == 0.5
