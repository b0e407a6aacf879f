import numpy as np
import pytest
from hypothesis import given, strategies as st

from mstld import multiscale as ms
from mstld import wavelets as wv
from mstld.tld import TLD, TldConfig

ALL = [ms.mtld, ms.mmtld1, ms.mmtld2, ms.fmmtld1, ms.fmmtld2]


class Squash:
    """Cheap nonlinear, constant-preserving stand-in for a denoiser."""

    name = "squash"

    def denoise(self, img, sigma):
        m = img.mean()
        return m + 40 * np.tanh((img - m) / 40)


class Smooth:
    """Constant-preserving 3x3 box blur (periodic)."""

    name = "smooth"

    def denoise(self, img, sigma):
        out = np.zeros_like(img)
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                out += np.roll(img, (dy, dx), axis=(0, 1))
        return out / 9


def direct_mmtld1(img, sigma, J, K, d):
    """MMTLD-1 written out step by step."""
    x_s = d.denoise(img, sigma)
    x_m = ms.mtld(img, sigma, ms.MsConfig(J=J), d)
    s_s = wv.iuwt_forward(x_s, K)
    s_m = wv.iuwt_forward(x_m, K)
    return wv.iuwt_inverse(wv.SubbandSet("iuwt", K, s_m.approx, s_s.details, s_s.shapes))


def direct_fmmtld1(img, sigma, J, d):
    """FMMTLD-1 written out step by step."""
    s_s = wv.dwt_forward(d.denoise(img, sigma), J)
    a = d.denoise(wv.dwt_forward(img, J).approx, sigma)
    return wv.dwt_inverse(wv.SubbandSet("dwt", J, a, s_s.details, s_s.shapes))


@pytest.mark.parametrize("f", ALL, ids=lambda f: f.__name__)
@pytest.mark.parametrize("J,K", [(1, 1), (2, 3), (3, 2)])
def test_identity_fixpoint(rng, f, J, K):
    img = rng.uniform(0, 255, (67, 80))
    out = f(img, 25.0, ms.MsConfig(J=J, K=K), ms.IdentityDenoiser())
    assert np.abs(out - img).max() <= 1e-8 * np.abs(img).max()


@pytest.mark.parametrize("f", ALL, ids=lambda f: f.__name__)
def test_constant_fixpoint(f):
    img = np.full((48, 40), 93.0)
    for d in (Squash(), Smooth()):
        np.testing.assert_allclose(f(img, 25.0, ms.MsConfig(J=2, K=2), d), 93.0, atol=1e-6)


def test_constant_fixpoint_with_tld():
    img = np.full((48, 48), 120.0)
    d = TLD(TldConfig(p=5, iters=2))
    for f in ALL:
        np.testing.assert_allclose(f(img, 25.0, ms.MsConfig(), d), 120.0, atol=1e-6)


@pytest.mark.parametrize("J", [1, 2])
def test_mmtld_versions_agree_at_k1(rng, J):
    img = rng.uniform(0, 255, (40, 36))
    cfg = ms.MsConfig(J=J, K=1)
    a = ms.mmtld1(img, 20, cfg, Squash())
    assert a.tobytes() == ms.mmtld2(img, 20, cfg, Squash()).tobytes()
    np.testing.assert_allclose(a, direct_mmtld1(img, 20, J, 1, Squash()), atol=1e-12)


def test_fmmtld_versions_agree_at_j1(rng):
    img = rng.uniform(0, 255, (41, 36))
    cfg = ms.MsConfig(J=1)
    a = ms.fmmtld1(img, 20, cfg, Smooth())
    np.testing.assert_allclose(a, ms.fmmtld2(img, 20, cfg, Smooth()), atol=1e-10)
    np.testing.assert_allclose(a, direct_fmmtld1(img, 20, 1, Smooth()), atol=1e-12)


def test_literal_flag_matches_memoised_at_j1(rng):
    img = rng.uniform(0, 255, (32, 32))
    a = ms.fmmtld2(img, 20, ms.MsConfig(J=1), Squash())
    b = ms.fmmtld2(img, 20, ms.MsConfig(J=1, literal=True), Squash())
    assert a.tobytes() == b.tobytes()


def test_literal_differs_for_deeper_pyramids(rng):
    img = rng.uniform(0, 255, (64, 64))
    a = ms.fmmtld2(img, 20, ms.MsConfig(J=2), Squash())
    b = ms.fmmtld2(img, 20, ms.MsConfig(J=2, literal=True), Squash())
    assert np.abs(a - b).max() > 1e-6


def test_mixing_takes_planes_from_each_source(rng):
    img = rng.uniform(0, 255, (48, 48))
    d = Squash()
    x_s = d.denoise(img, 25)
    x_m = ms.mtld(img, 25, ms.MsConfig(), d)
    s_s, s_m = wv.iuwt_forward(x_s, 1), wv.iuwt_forward(x_m, 1)
    mixed = wv.mix_subbands(s_m, s_s)
    np.testing.assert_allclose(mixed.approx, s_m.approx, atol=1e-9)
    np.testing.assert_allclose(mixed.details[0], s_s.details[0], atol=1e-9)
    out = ms.mmtld(img, 25, ms.MsConfig(K=1), d)
    np.testing.assert_allclose(out, s_m.approx + s_s.details[0], atol=1e-9)


def test_mmtld2_k2_unrolled(rng):
    img = rng.uniform(0, 255, (40, 40))
    d = Squash()
    x_s = d.denoise(img, 25)
    x_m = ms.mtld(img, 25, ms.MsConfig(), d)
    t = ms.mix_results(x_s, x_m, 2)
    t = ms.mix_results(t, x_m, 1)
    np.testing.assert_array_equal(ms.mmtld2(img, 25, ms.MsConfig(K=2), d), t)


@pytest.mark.parametrize("J", [1, 2, 3])
def test_call_accounting(rng, J):
    img = rng.uniform(0, 255, (64, 64))
    c = ms.CountingDenoiser()
    ms.mtld(img, 25, ms.MsConfig(J=J), c)
    assert len(c.calls) == 3 * J + 1

    detail_shapes = {b.shape for d in wv.dwt_forward(img, J).details for b in d}
    pyramid_shapes = {a.shape for a in ms.approximation_pyramid(img, J)}
    for literal in (False, True):
        for f in (ms.fmmtld1, ms.fmmtld2):
            c.reset()
            f(img, 25, ms.MsConfig(J=J, literal=literal), c)
            assert len(c.calls) <= 2 * J
            # every call is on a low-pass image: the input or one of its approximations
            assert all(s in pyramid_shapes for s, _ in c.calls)
        c.reset()
        ms.fmmtld2(img, 25, ms.MsConfig(J=J, literal=literal), c)
        assert len(c.calls) == (2 * J if literal else J + 1)
    assert (64, 64) not in detail_shapes


def test_fmmtld_never_sees_detail_planes(rng):
    img = rng.uniform(0, 255, (64, 64))
    seen = []

    class Spy:
        name = "spy"

        def denoise(self, x, sigma):
            seen.append(x.copy())
            return x

    ms.fmmtld2(img, 25, ms.MsConfig(J=2), Spy())
    details = [b for d in wv.dwt_forward(img, 2).details for b in d]
    pyramid = ms.approximation_pyramid(img, 2)
    for x in seen:
        assert any(x.shape == p.shape and np.allclose(x, p) for p in pyramid)
        assert not any(x.shape == b.shape and np.allclose(x, b) for b in details)


def test_subband_sigma_rule():
    seen = []

    class Rec:
        name = "rec"

        def denoise(self, x, sigma):
            seen.append(sigma)
            return x

    rule = lambda sigma, scale, band: sigma * (2 if band == "LL" else 1) + scale
    ms.mtld(np.zeros((32, 32)), 10.0, ms.MsConfig(J=2, sigma_subband_rule=rule), Rec())
    assert seen == [11, 11, 11, 12, 12, 12, 22]


def test_config_validation():
    with pytest.raises(ValueError):
        ms.MsConfig(J=0)
    with pytest.raises(ValueError):
        ms.MsConfig(mix_bank="haar")
    with pytest.raises(ValueError):
        ms.MsConfig(sigma_subband_rule="bogus")
    with pytest.raises(ValueError):
        ms.run_method("bm3d", np.zeros((8, 8)), 1, None, ms.IdentityDenoiser())
    with pytest.raises(ValueError):
        ms.mmtld(np.zeros((8, 8)), 1, None, ms.IdentityDenoiser(), version=3)


def test_shape_changing_denoiser_rejected():
    class Bad:
        name = "bad"

        def denoise(self, x, sigma):
            return x[:-1]

    with pytest.raises(ValueError):
        ms.mtld(np.zeros((16, 16)), 1, None, Bad())


def test_dwt_mixing_bank(rng):
    img = rng.uniform(0, 255, (32, 32))
    out = ms.mmtld(img, 10, ms.MsConfig(K=2, mix_bank="dmey"), ms.IdentityDenoiser())
    np.testing.assert_allclose(out, img, atol=1e-8 * 255)


def test_cached_denoiser(rng):
    c = ms.CountingDenoiser(Squash())
    cached = ms.CachedDenoiser(c)
    img = rng.normal(size=(8, 8))
    a = cached.denoise(img, 5)
    b = cached.denoise(img.copy(), 5)
    cached.denoise(img, 6)
    assert len(c.calls) == 2 and cached.hits == 1
    np.testing.assert_array_equal(a, b)
    b[0, 0] = 1e9
    assert cached.denoise(img, 5)[0, 0] != 1e9


def test_protocol():
    assert isinstance(ms.IdentityDenoiser(), ms.Denoiser)
    assert isinstance(TLD(), ms.Denoiser)


@given(seed=st.integers(0, 2**32 - 1), J=st.integers(1, 3), K=st.integers(1, 3),
       h=st.integers(24, 70), w=st.integers(24, 70))
def test_identity_fixpoint_property(seed, J, K, h, w):
    img = np.random.default_rng(seed).uniform(0, 255, (h, w))
    cfg = ms.MsConfig(J=J, K=K)
    for f in ALL:
        out = f(img, 25.0, cfg, ms.IdentityDenoiser())
        assert np.abs(out - img).max() <= 1e-8 * np.abs(img).max()
