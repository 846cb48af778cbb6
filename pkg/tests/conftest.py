"""Shared fixtures: scripted mock endpoints, small catalogs and datasets."""

from __future__ import annotations

import json

import pytest

from mtscale.corpus import load_prompts
from mtscale.gateway.mock_script import script_from_dict
from mtscale.gateway.mock_server import MockCompletionServer
from mtscale.gateway.types import EndpointConfig
from mtscale.gateway.completion import CompletionClient
from mtscale.model import Language, Question


@pytest.fixture(scope="session")
def catalog():
    return load_prompts()


@pytest.fixture
def mock_endpoint():
    """Factory: start a mock server for a script dict, yield a client."""
    started = []

    def factory(script_dict: dict, retries: int = 3) -> CompletionClient:
        server = MockCompletionServer(script_from_dict(script_dict)).start()
        started.append(server)
        client = CompletionClient(
            EndpointConfig(url=server.url, model="mock", connect_retries=retries, backoff_s=0.01)
        )
        started.append(client)
        return client

    yield factory
    for item in started:
        if isinstance(item, CompletionClient):
            item.close()
        else:
            item.stop()


def make_question(language=Language.EN, gold=204, text="What is 200 plus 4?", question_id="q1", dataset_id="d1"):
    return Question(
        dataset_id=dataset_id, question_id=question_id, language=language, text=text, gold_answer=gold
    )


@pytest.fixture
def tiny_dataset_file(tmp_path):
    """One-question dataset in all six languages, gold 204."""
    doc = {
        "datasets": [
            {
                "id": "c1",
                "questions": [
                    {
                        "id": "q1",
                        "gold": 204,
                        "text": {
                            "en": "What is 200 plus 4?",
                            "de": "Was ist 200 plus 4?",
                            "it": "Quanto fa 200 più 4?",
                            "pt": "Quanto é 200 mais 4?",
                            "vi": "200 cộng 4 bằng bao nhiêu?",
                            "tl": "Ano ang kabuuan ng 200 at 4?",
                        },
                    }
                ],
            }
        ]
    }
    path = tmp_path / "dataset.json"
    path.write_text(json.dumps(doc, ensure_ascii=False), encoding="utf-8")
    return path
