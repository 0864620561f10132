"""Reference embedder determinism, normalization, and the remote client."""

import httpx
import numpy as np
import pytest
from fastapi.testclient import TestClient

from ragscope.embedder import HashedNgramEmbedder, RemoteEmbedder, normalize
from ragscope.errors import InvalidInputError, ProtocolError, TransportError
from ragscope.model_server import create_model_app


@pytest.fixture(scope="module")
def emb():
    return HashedNgramEmbedder(dim=64, seed=13)


class TestHashedNgramEmbedder:
    def test_deterministic_bitwise(self, emb):
        a = emb.embed("mountain")
        b = emb.embed("mountain")
        assert a.dtype == np.float32
        assert np.array_equal(a, b)

    def test_unit_norm(self, emb):
        rng = np.random.default_rng(3)
        words = ["ridge", "harbor", "a", "x", "longer sentence with many words", "🚀 emoji"]
        for text in words + ["".join(chr(97 + i) for i in rng.integers(0, 26, 30))]:
            v = emb.embed(text)
            assert abs(float(np.dot(v.astype(np.float64), v.astype(np.float64))) - 1.0) < 1e-6

    def test_lexical_overlap_orders_similarity(self, emb):
        target = emb.embed("tall mountain peak").astype(np.float64)
        near = emb.embed("tall mountain").astype(np.float64)
        far = emb.embed("stock market crash").astype(np.float64)
        assert float(target @ near) > float(target @ far)

    def test_batch_equals_map(self, emb):
        texts = ["one", "two words", "three word phrase", "."]
        batch = emb.embed_batch(texts)
        for text, vec in zip(texts, batch):
            assert np.array_equal(vec, emb.embed(text))

    def test_batch_of_one(self, emb):
        assert np.array_equal(emb.embed_batch(["solo"])[0], emb.embed("solo"))

    def test_empty_rejected(self, emb):
        with pytest.raises(InvalidInputError):
            emb.embed("")
        with pytest.raises(InvalidInputError):
            emb.embed("   ")

    def test_batch_error_names_element(self, emb):
        with pytest.raises(InvalidInputError, match="batch element 1"):
            emb.embed_batch(["fine", "", "fine"])

    def test_seed_changes_vectors(self):
        a = HashedNgramEmbedder(dim=64, seed=13).embed("same text")
        b = HashedNgramEmbedder(dim=64, seed=14).embed("same text")
        assert not np.array_equal(a, b)

    def test_dim_respected(self):
        assert HashedNgramEmbedder(dim=32).embed("text").shape == (32,)
        with pytest.raises(InvalidInputError):
            HashedNgramEmbedder(dim=1)


class TestNormalize:
    def test_zero_vector_rejected(self):
        with pytest.raises(InvalidInputError):
            normalize(np.zeros(4))

    def test_norm_close_to_one(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            v = normalize(rng.standard_normal(16) * 1e3)
            assert abs(np.linalg.norm(v.astype(np.float64)) - 1.0) < 1e-6


class TestRemoteEmbedder:
    @pytest.fixture()
    def remote(self):
        app = create_model_app(embedder=HashedNgramEmbedder(dim=64, seed=13))
        return RemoteEmbedder("http://testserver", dim=64, client=TestClient(app))

    def test_matches_local_reference(self, remote):
        local = HashedNgramEmbedder(dim=64, seed=13)
        got = remote.embed("harbor vessel")
        want = local.embed("harbor vessel")
        assert np.allclose(got, want, atol=1e-7)

    def test_batch_order_preserved(self, remote):
        texts = ["alpha", "beta", "gamma"]
        got = remote.embed_batch(texts)
        local = HashedNgramEmbedder(dim=64, seed=13)
        for text, vec in zip(texts, got):
            assert np.allclose(vec, local.embed(text), atol=1e-7)

    def test_renormalizes_unnormalized_vectors(self):
        def handler(request):
            return httpx.Response(200, json={"vectors": [[3.0, 4.0]]})

        client = httpx.Client(transport=httpx.MockTransport(handler), base_url="http://e")
        remote = RemoteEmbedder("http://e", dim=2, client=client)
        v = remote.embed("anything")
        assert np.allclose(v, [0.6, 0.8], atol=1e-6)

    def test_wrong_count_rejected(self):
        def handler(request):
            return httpx.Response(200, json={"vectors": []})

        client = httpx.Client(transport=httpx.MockTransport(handler), base_url="http://e")
        remote = RemoteEmbedder("http://e", dim=2, client=client)
        with pytest.raises(ProtocolError):
            remote.embed("anything")

    def test_wrong_dim_rejected(self):
        def handler(request):
            return httpx.Response(200, json={"vectors": [[1.0, 0.0, 0.0]]})

        client = httpx.Client(transport=httpx.MockTransport(handler), base_url="http://e")
        remote = RemoteEmbedder("http://e", dim=2, client=client)
        with pytest.raises(ProtocolError):
            remote.embed("anything")

    def test_timeout_maps_to_transport_error(self):
        def handler(request):
            raise httpx.ConnectTimeout("slow")

        client = httpx.Client(transport=httpx.MockTransport(handler), base_url="http://e")
        remote = RemoteEmbedder("http://e", dim=2, client=client)
        with pytest.raises(TransportError) as err:
            remote.embed("anything")
        assert err.value.kind == "timeout"

    def test_refused_maps_to_transport_error(self):
        def handler(request):
            raise httpx.ConnectError("no route")

        client = httpx.Client(transport=httpx.MockTransport(handler), base_url="http://e")
        remote = RemoteEmbedder("http://e", dim=2, client=client)
        with pytest.raises(TransportError) as err:
            remote.embed("anything")
        assert err.value.kind == "refused"
