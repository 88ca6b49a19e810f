import asyncio

import pytest

from geobench.db import ReplyStore
from geobench.errors import AuthFailure, ConfigError, ExhaustedRetries, ImageLoadError, MalformedEndpointResponse, RequestRejected
from geobench.gateway import ModelEndpoint, ModelGateway, backoff_delay, load_endpoints, noisy_guess
from geobench.metrics import haversine_distance
from geobench.parser import parse_coordinates
from geobench.prompts import PromptStrategy, StrategyKind, render
from geobench.services.run_log import RunLog

ENV = {"VLM_TOKEN": "secret"}


def _prompt(record, kind=StrategyKind.ZERO_SHOT):
    return render(PromptStrategy(kind), record)


def _gateway(memory_log, clock, transport, **kwargs):
    kwargs.setdefault("environ", ENV)
    return ModelGateway(memory_log, transport=transport, clock=clock, jitter_seed=1, **kwargs)


def test_endpoint_validation():
    with pytest.raises(ValueError, match="temperature must be 0.0"):
        ModelEndpoint(name="x", base_url="https://a", temperature=0.7)
    assert ModelEndpoint(name="x", base_url="https://a", temperature=0.7, allow_nonzero_temperature=True)
    with pytest.raises(ValueError, match="unknown mock kind"):
        ModelEndpoint(name="x", base_url="mock:psychic")
    with pytest.raises(ValueError, match="http"):
        ModelEndpoint(name="x", base_url="ftp://a")


def test_load_endpoints_from_toml(tmp_path):
    path = tmp_path / "endpoints.toml"
    path.write_text(
        '[[endpoints]]\nname = "oracle"\nbase_url = "mock:oracle"\n\n'
        '[[endpoints]]\nname = "gpt"\nbase_url = "https://api.example/v1"\nmodel = "vlm"\n'
        'auth_token_env = "VLM_TOKEN"\nmax_in_flight = 8\n',
        encoding="utf-8",
    )
    oracle, gpt = load_endpoints(path, default_in_flight=2)
    assert oracle.is_mock and oracle.mock_kind == "oracle" and oracle.max_in_flight == 2
    assert gpt.max_in_flight == 8 and gpt.auth_token_env == "VLM_TOKEN"

    dup = tmp_path / "dup.toml"
    dup.write_text('[[endpoints]]\nname = "a"\nbase_url = "mock:oracle"\n' * 2, encoding="utf-8")
    with pytest.raises(ConfigError, match="duplicate endpoint names: a"):
        load_endpoints(dup)


def test_backoff_schedule():
    assert [backoff_delay(n) for n in range(1, 9)] == [1, 2, 4, 8, 16, 32, 60, 60]
    assert backoff_delay(2, 1.2) == pytest.approx(2.4)
    assert backoff_delay(6, 1.2) == pytest.approx(38.4)
    assert backoff_delay(7, 0.8) == pytest.approx(51.2)
    assert backoff_delay(10, 1.2) == 60.0
    assert backoff_delay(10, 0.8) == pytest.approx(60.0)


def test_oracle_reply_parses_to_truth(make_record, oracle_endpoint, memory_log):
    record = make_record("r", -38.6633, 143.1051)
    gateway = ModelGateway(memory_log)
    reply = asyncio.run(gateway.query(oracle_endpoint, _prompt(record)))
    assert parse_coordinates(reply.raw_text).coordinate == record.truth
    assert reply.attempt_count == 1 and reply.latency_ms == 0.0 and not reply.cached
    assert gateway.mock_calls["oracle"] == 1
    assert [e.status for e in memory_log.entries] == ["ok"]


def test_noisy_mock_is_seeded(make_record):
    record = make_record("r", 45.0, 7.0)
    assert noisy_guess(record, 3, 0.0) == record.truth
    a, b = noisy_guess(record, 3, 10.0), noisy_guess(record, 3, 10.0)
    assert a == b
    assert noisy_guess(record, 4, 10.0) != a
    assert haversine_distance(record.truth, a) <= 30.0 + 1e-6


def test_retries_rate_limited_then_succeeds(make_record, http_endpoint, memory_log, clock, fake_transport):
    transport = fake_transport([429, 429, 200], clock=clock)
    gateway = _gateway(memory_log, clock, transport)
    reply = asyncio.run(gateway.query(http_endpoint(), _prompt(make_record())))

    assert reply.raw_text == "Latitude and Longitude: 10, 20"
    assert reply.attempt_count == 3
    assert len(transport.calls) == 3
    first, second = clock.sleeps
    assert 0.8 <= first <= 1.2
    assert 1.6 <= second <= 2.4
    assert [e.status for e in memory_log.entries] == ["http_429", "http_429", "ok"]
    assert [e.attempt for e in memory_log.entries] == [1, 2, 3]


def test_transport_errors_and_5xx_are_retried(
    make_record, http_endpoint, memory_log, clock, fake_transport, transport_error
):
    transport = fake_transport([transport_error("reset"), 503, 200], clock=clock)
    reply = asyncio.run(_gateway(memory_log, clock, transport).query(http_endpoint(), _prompt(make_record())))
    assert reply.attempt_count == 3
    assert [e.status for e in memory_log.entries] == ["transport_error", "http_503", "ok"]


def test_exhausted_retries(make_record, http_endpoint, memory_log, clock, fake_transport):
    transport = fake_transport([500] * 10, clock=clock)
    gateway = _gateway(memory_log, clock, transport)
    with pytest.raises(ExhaustedRetries) as info:
        asyncio.run(gateway.query(http_endpoint(max_retries=2), _prompt(make_record())))
    assert info.value.attempts == 3
    assert len(transport.calls) == 3
    assert len(clock.sleeps) == 2
    assert memory_log.lines_written == 3


def test_unauthorized_is_not_retried(make_record, http_endpoint, memory_log, clock, fake_transport):
    transport = fake_transport([401, 200], clock=clock)
    gateway = _gateway(memory_log, clock, transport)
    with pytest.raises(AuthFailure):
        asyncio.run(gateway.query(http_endpoint(auth_token_env="VLM_TOKEN"), _prompt(make_record())))
    assert len(transport.calls) == 1
    assert transport.calls[0]["headers"]["Authorization"] == "Bearer secret"
    assert clock.sleeps == []


def test_bad_request_is_rejected_without_retry(make_record, http_endpoint, memory_log, clock, fake_transport):
    transport = fake_transport([400], clock=clock)
    with pytest.raises(RequestRejected):
        asyncio.run(_gateway(memory_log, clock, transport).query(http_endpoint(), _prompt(make_record())))
    assert len(transport.calls) == 1


def test_missing_token_fails_before_network(make_record, http_endpoint, memory_log, clock, fake_transport):
    transport = fake_transport([200], clock=clock)
    gateway = _gateway(memory_log, clock, transport, environ={})
    with pytest.raises(AuthFailure, match="VLM_TOKEN"):
        asyncio.run(gateway.query(http_endpoint(auth_token_env="VLM_TOKEN"), _prompt(make_record())))
    assert transport.calls == []
    assert [e.status for e in memory_log.entries] == ["auth_failure"]


def test_malformed_body_keeps_raw_text(make_record, http_endpoint, memory_log, clock, fake_transport):
    transport = fake_transport([(200, '{"unexpected": true}')], clock=clock)
    with pytest.raises(MalformedEndpointResponse) as info:
        asyncio.run(_gateway(memory_log, clock, transport).query(http_endpoint(), _prompt(make_record())))
    assert info.value.body == '{"unexpected": true}'
    assert info.value.attempts == 1
    assert memory_log.entries[0].status == "malformed"
    assert memory_log.entries[0].raw_text == '{"unexpected": true}'


def test_unreadable_local_image(make_record, http_endpoint, memory_log, clock, fake_transport, tmp_path):
    record = make_record(image_uri=str(tmp_path / "missing.jpg"))
    transport = fake_transport([200], clock=clock)
    with pytest.raises(ImageLoadError):
        asyncio.run(_gateway(memory_log, clock, transport).query(http_endpoint(), _prompt(record)))
    assert transport.calls == []


def test_local_image_is_inlined(make_record, http_endpoint, memory_log, clock, fake_transport, tmp_path):
    image = tmp_path / "scene.png"
    image.write_bytes(b"\x89PNG fake")
    transport = fake_transport([200], clock=clock)
    asyncio.run(_gateway(memory_log, clock, transport).query(http_endpoint(), _prompt(make_record(image_uri=str(image)))))
    call = transport.calls[0]
    assert call["url"] == "https://api.example/v1/chat/completions"
    assert call["payload"]["temperature"] == 0.0
    parts = call["payload"]["messages"][0]["content"]
    assert parts[0]["type"] == "text"
    assert parts[1]["image_url"]["url"].startswith("data:image/png;base64,")


def test_system_role_and_ollama_adapter(make_record, http_endpoint, memory_log, clock, fake_transport):
    transport = fake_transport([(200, '{"message": {"content": "Latitude and Longitude: 1.5, 2.5"}}')], clock=clock)
    endpoint = http_endpoint(base_url="http://localhost:11434", adapter="ollama", prompt_role="system")
    reply = asyncio.run(_gateway(memory_log, clock, transport).query(endpoint, _prompt(make_record())))
    assert reply.raw_text.endswith("1.5, 2.5")
    messages = transport.calls[0]["payload"]["messages"]
    assert messages[0]["role"] == "system"
    assert transport.calls[0]["url"] == "http://localhost:11434/api/chat"
    assert memory_log.entries[0].prompt_role == "system"


def test_requests_per_minute_cap(synthetic_records, http_endpoint, memory_log, clock, fake_transport):
    transport = fake_transport([200] * 5, clock=clock)
    gateway = _gateway(memory_log, clock, transport)
    endpoint = http_endpoint(requests_per_minute=2)

    async def run():
        await asyncio.gather(*(gateway.query(endpoint, _prompt(r)) for r in synthetic_records(5)))

    asyncio.run(run())
    stamps = sorted(call["at"] for call in transport.calls)
    assert stamps == [0.0, 0.0, 60.0, 60.0, 120.0]
    for start in stamps:
        assert sum(1 for t in stamps if start <= t < start + 60.0) <= 2


def test_resume_reuses_stored_replies(make_record, http_endpoint, clock, fake_transport, tmp_path):
    record = make_record()
    prompt = _prompt(record)

    async def run(resume, transport, log):
        async with ReplyStore(tmp_path / "replies.db") as store:
            gateway = _gateway(log, clock, transport, store=store, resume=resume)
            return await gateway.query(http_endpoint(), prompt)

    first_log = RunLog(None)
    first = asyncio.run(run(False, fake_transport([200], clock=clock), first_log))
    assert not first.cached and first_log.lines_written == 1

    second_log = RunLog(None)
    silent = fake_transport([], clock=clock)
    second = asyncio.run(run(True, silent, second_log))
    assert second.cached
    assert second.raw_text == first.raw_text
    assert second.fingerprint == first.fingerprint
    assert silent.calls == []
    assert second_log.lines_written == 0


def test_fingerprint_depends_on_strategy(make_record, oracle_endpoint, memory_log):
    record = make_record()
    gateway = ModelGateway(memory_log)
    a = asyncio.run(gateway.query(oracle_endpoint, _prompt(record, StrategyKind.ZERO_SHOT)))
    b = asyncio.run(gateway.query(oracle_endpoint, _prompt(record, StrategyKind.FEW_SHOT)))
    assert a.fingerprint != b.fingerprint
    assert gateway.mock_calls["oracle"] == 2


def test_run_log_file_has_one_line_per_attempt(make_record, http_endpoint, clock, fake_transport, tmp_path):
    path = tmp_path / "run_log.jsonl"
    log = RunLog(path, truncate=True)
    transport = fake_transport([503, 200], clock=clock)
    asyncio.run(_gateway(log, clock, transport).query(http_endpoint(), _prompt(make_record())))
    rows = RunLog.read(path)
    assert [r["status"] for r in rows] == ["http_503", "ok"]
    assert rows[1]["temperature"] == 0.0
    assert log.entries == [] and log.lines_written == 2
    assert rows[1]["timestamp"]
    assert "error" not in rows[1]
