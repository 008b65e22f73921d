import httpx
import pytest
from hypothesis import given, strategies as st

from polyroute.gateway import (
    GPT_EMB,
    ML_EMB,
    CallLog,
    CallRecord,
    CapabilityError,
    ChatMessage,
    CompletionParams,
    HttpCompletionClient,
    HttpEmbeddingClient,
    HttpTranslationClient,
    MockCompletionClient,
    MockEmbeddingClient,
    MockTranslationClient,
    OpenAIChatAdapter,
    ProtocolError,
    Retryable,
    RetryPolicy,
    TransportError,
    completion_key,
    tagged_language,
    translation_tag,
    with_retries,
)

PARAMS = CompletionParams()


def messages(text="hello"):
    return [ChatMessage("system", "sys"), ChatMessage("user", text)]


class TestRetries:
    def test_success_first_try(self):
        result, retries = with_retries(lambda: "ok", RetryPolicy(), sleep=lambda _: None)
        assert (result, retries) == ("ok", 0)

    def test_backoff_schedule(self):
        delays = []
        calls = {"n": 0}

        def flaky():
            calls["n"] += 1
            if calls["n"] < 4:
                raise Retryable("boom")
            return "ok"

        result, retries = with_retries(flaky, RetryPolicy(), sleep=delays.append)
        assert result == "ok" and retries == 3
        assert delays == [0.5, 1.0, 2.0]  # base 0.5, doubling

    def test_retry_after_overrides_backoff(self):
        delays = []
        calls = {"n": 0}

        def flaky():
            calls["n"] += 1
            if calls["n"] == 1:
                raise Retryable("slow down", retry_after=7.5)
            return "ok"

        with_retries(flaky, RetryPolicy(), sleep=delays.append)
        assert delays == [7.5]

    def test_gives_up_after_max_attempts(self):
        def always_fail():
            raise Retryable("down")

        with pytest.raises(TransportError) as err:
            with_retries(always_fail, RetryPolicy(max_attempts=5), sleep=lambda _: None)
        assert err.value.attempts == 5


class TestMockCompletion:
    def test_table_hit(self):
        client = MockCompletionClient()
        client.add_response(messages(), PARAMS, "pinned")
        assert client.complete(messages(), PARAMS) == "pinned"

    def test_miss_is_deterministic_digest(self):
        a = MockCompletionClient().complete(messages("q"), PARAMS)
        b = MockCompletionClient().complete(messages("q"), PARAMS)
        assert a == b and a.startswith("mock-answer-")

    def test_key_sensitive_to_params(self):
        assert completion_key(messages(), PARAMS) != completion_key(
            messages(), CompletionParams(temperature=0.5)
        )

    def test_empty_messages_rejected(self):
        with pytest.raises(ValueError):
            MockCompletionClient().complete([], PARAMS)

    def test_call_logged(self):
        log = CallLog()
        MockCompletionClient(call_log=log).complete(messages(), PARAMS)
        assert log.count("complete") == 1


class TestMockTranslation:
    def test_round_trip_identity(self):
        client = MockTranslationClient()
        out = client.translate("नमस्ते", "hi", "en")
        assert tagged_language(out) == "en"
        assert client.translate(out, "en", "hi") == "नमस्ते"

    def test_same_language_rejected(self):
        with pytest.raises(ValueError):
            MockTranslationClient().translate("x", "hi", "hi")

    def test_unsupported_language(self):
        client = MockTranslationClient(supported={"en", "hi"})
        with pytest.raises(CapabilityError):
            client.translate("x", "hi", "zz")

    def test_untagged_text_has_no_language(self):
        assert tagged_language("plain text") is None

    @given(st.text(max_size=30), st.sampled_from(["hi", "bn", "ta"]))
    def test_round_trip_property(self, text, src):
        client = MockTranslationClient()
        assert client.translate(client.translate(text, src, "en"), "en", src) == text

    def test_tag_format(self):
        assert translation_tag("hi", "en") == "⟪hi→en⟫"


class TestMockEmbedding:
    def test_deterministic(self):
        a = MockEmbeddingClient(GPT_EMB).embed(["text"])[0]
        b = MockEmbeddingClient(GPT_EMB).embed(["text"])[0]
        assert a.values == b.values and a.backend == GPT_EMB

    def test_backends_differ(self):
        a = MockEmbeddingClient(GPT_EMB).embed(["text"])[0]
        b = MockEmbeddingClient(ML_EMB).embed(["text"])[0]
        assert a.values != b.values

    def test_unknown_backend(self):
        with pytest.raises(ValueError):
            MockEmbeddingClient("word2vec")

    def test_empty_inputs_rejected(self):
        with pytest.raises(ValueError):
            MockEmbeddingClient(GPT_EMB).embed([])
        with pytest.raises(ValueError):
            MockEmbeddingClient(GPT_EMB).embed([""])

    def test_dimension(self):
        vec = MockEmbeddingClient(GPT_EMB, dimension=16).embed(["x"])[0]
        assert vec.dimension == 16


class TestCallLog:
    def test_filter_and_count(self):
        log = CallLog()
        log.append(CallRecord("complete", "mock", 0.0))
        log.append(CallRecord("translate", "mock", 0.0))
        assert log.count() == 2
        assert log.count("translate") == 1
        log.clear()
        assert log.count() == 0


def http_client(cls, handler, **kwargs):
    transport = httpx.MockTransport(handler)
    return cls(
        "http://fake",
        client=httpx.Client(transport=transport),
        sleep=lambda _: None,
        **kwargs,
    )


class TestHttpClients:
    def test_completion_happy_path(self):
        def handler(request):
            assert request.url.path == "/v1/complete"
            return httpx.Response(200, json={"text": "answer"})

        client = http_client(HttpCompletionClient, handler)
        assert client.complete(messages(), PARAMS) == "answer"
        assert client.call_log.count("complete") == 1

    def test_retries_on_429_then_succeeds(self):
        state = {"n": 0}

        def handler(request):
            state["n"] += 1
            if state["n"] == 1:
                return httpx.Response(429, headers={"retry-after": "0"})
            return httpx.Response(200, json={"text": "late"})

        client = http_client(HttpCompletionClient, handler)
        assert client.complete(messages(), PARAMS) == "late"
        assert client.call_log.records("complete")[0].retries == 1

    def test_transport_error_after_exhaustion(self):
        client = http_client(
            HttpCompletionClient,
            lambda request: httpx.Response(503),
            retry=RetryPolicy(max_attempts=2),
        )
        with pytest.raises(TransportError):
            client.complete(messages(), PARAMS)

    def test_protocol_error_on_bad_shape(self):
        client = http_client(HttpCompletionClient, lambda r: httpx.Response(200, json={"nope": 1}))
        with pytest.raises(ProtocolError):
            client.complete(messages(), PARAMS)

    def test_4xx_is_not_retried(self):
        state = {"n": 0}

        def handler(request):
            state["n"] += 1
            return httpx.Response(403)

        client = http_client(HttpCompletionClient, handler)
        with pytest.raises(ProtocolError):
            client.complete(messages(), PARAMS)
        assert state["n"] == 1

    def test_openai_adapter_extracts_choice(self):
        body = {"choices": [{"message": {"content": "chat answer"}}]}
        client = http_client(OpenAIChatAdapter, lambda r: httpx.Response(200, json=body))
        assert client.complete(messages(), PARAMS) == "chat answer"

    def test_translation_endpoint(self):
        def handler(request):
            assert request.url.path == "/v1/translate"
            return httpx.Response(200, json={"text": "bonjour"})

        client = http_client(HttpTranslationClient, handler)
        assert client.translate("hello", "en", "fr") == "bonjour"

    def test_embedding_dimension_consistency(self):
        body = {"vectors": [[1.0, 2.0], [3.0]]}
        client = http_client(HttpEmbeddingClient, lambda r: httpx.Response(200, json=body), backend=GPT_EMB)
        with pytest.raises(ProtocolError):
            client.embed(["a", "b"])

    def test_embedding_happy_path(self):
        body = {"vectors": [[1.0, 2.0], [3.0, 4.0]]}
        client = http_client(HttpEmbeddingClient, lambda r: httpx.Response(200, json=body), backend=ML_EMB)
        vecs = client.embed(["a", "b"])
        assert [v.values for v in vecs] == [(1.0, 2.0), (3.0, 4.0)]
        assert all(v.backend == ML_EMB for v in vecs)


class TestValidation:
    def test_bad_temperature(self):
        with pytest.raises(ValueError):
            CompletionParams(temperature=3.0)

    def test_bad_role(self):
        with pytest.raises(ValueError):
            ChatMessage("tool", "x")

    def test_empty_user_content(self):
        with pytest.raises(ValueError):
            ChatMessage("user", "")
