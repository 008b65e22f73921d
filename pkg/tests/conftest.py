import json

import pytest

from polyroute import languages
from polyroute.corpus import QARecord
from polyroute.mocks import make_mock_deps
from polyroute.retrieval import RetrievalConfig


@pytest.fixture(scope="session")
def catalog():
    return languages.load_catalog()


@pytest.fixture(scope="session")
def distances():
    return languages.load_distances()


@pytest.fixture
def deps():
    return make_mock_deps(seed=0)


@pytest.fixture
def deps_no_retrieval():
    return make_mock_deps(seed=0, retrieval_cfg=RetrievalConfig(enabled=False))


def make_record(rid="r1", language="hi", dataset="indicqa", context=None, question=None, answers=("उत्तर",)):
    return QARecord(
        id=rid,
        dataset=dataset,
        language=language,
        context=context or ("यह एक लंबा संदर्भ अनुच्छेद है। " * 20),
        question=question or "प्रश्न क्या है?",
        gold_answers=tuple(answers),
    )


@pytest.fixture
def hindi_record():
    return make_record()


@pytest.fixture
def fixture_records():
    """Three records across languages; ta has no Sim pivot in the catalog."""
    return [
        make_record("r1", "hi"),
        make_record("r2", "bn", context="এটি একটি দীর্ঘ প্রসঙ্গ। " * 20, question="প্রশ্ন কী?", answers=("উত্তর",)),
        make_record("r3", "ta", context="இது ஒரு நீண்ட சூழல். " * 20, question="கேள்வி என்ன?", answers=("பதில்",)),
    ]


@pytest.fixture
def squad_file(tmp_path):
    """SQuAD-style JSON fixture: one paragraph, two questions."""
    payload = {
        "data": [
            {
                "title": "t",
                "paragraphs": [
                    {
                        "context": "पेरिस फ्रांस की राजधानी है।",
                        "qas": [
                            {"id": "q1", "question": "फ्रांस की राजधानी क्या है?", "answers": [{"text": "पेरिस"}]},
                            {"id": "q2", "question": "पेरिस कहाँ है?", "answers": [{"text": "फ्रांस"}, {"text": "फ्रांस में"}]},
                        ],
                    }
                ],
            }
        ]
    }
    path = tmp_path / "fixture.hi.json"
    path.write_text(json.dumps(payload, ensure_ascii=False), encoding="utf-8")
    return path
