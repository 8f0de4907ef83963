"""Writes the end-to-end fixture: 10 queries x 3 documents, embeddings that
pin each query to its own three documents, a scripted mock endpoint and a
pipeline config. Re-running it reproduces the committed files byte for byte.
"""

import json
from pathlib import Path

HERE = Path(__file__).resolve().parent

# (question, answers, [(title, text) x 3]); documents that do not contain any
# answer are noise documents.
TOPICS = [
    ("Who was president of the United States in 1933?", ["Franklin D. Roosevelt", "Roosevelt"], [
        ("Franklin D. Roosevelt",
         "Franklin D. Roosevelt became president in 1933. He led the country through the Great "
         "Depression. Roosevelt was elected four times."),
        ("New Deal",
         "The New Deal was a series of programs. Roosevelt announced them after his 1933 "
         "inauguration. Many agencies were created."),
        ("Great Depression",
         "The Great Depression began in 1929. Unemployment rose sharply. Banks failed across "
         "the nation."),
    ]),
    ("What is the capital of Australia?", ["Canberra"], [
        ("Canberra",
         "Canberra is the capital city of Australia. It was founded in 1913. The city hosts "
         "Parliament House."),
        ("Sydney",
         "Sydney is the largest city in Australia. Its harbour is famous worldwide. The Opera "
         "House opened in 1973."),
        ("Australian Capital Territory",
         "The Australian Capital Territory contains Canberra. It was carved out of New South "
         "Wales. The territory is small."),
    ]),
    ("Who wrote Pride and Prejudice?", ["Jane Austen", "Austen"], [
        ("Pride and Prejudice",
         "Pride and Prejudice is a novel by Jane Austen. It was published in 1813. Elizabeth "
         "Bennet is the heroine."),
        ("Jane Austen",
         "Jane Austen was an English novelist. She wrote six major novels. Austen died in 1817."),
        ("Regency era",
         "The Regency era spanned 1811 to 1820. Fashion and manners changed. Novels of manners "
         "became popular."),
    ]),
    ("What is the chemical symbol for gold?", ["Au"], [
        ("Gold",
         "Gold is a chemical element with the symbol Au. Its atomic number is 79. It is a "
         "dense, soft metal."),
        ("Silver",
         "Silver is a lustrous metal. Its symbol comes from the Latin argentum. It conducts "
         "electricity well."),
        ("Periodic table",
         "The periodic table lists every element. Gold appears as Au in group 11. Rows are "
         "called periods."),
    ]),
    ("In which year did the Berlin Wall fall?", ["1989"], [
        ("Berlin Wall",
         "The Berlin Wall fell on 9 November 1989. Crowds crossed freely that night. Germany "
         "reunified the next year."),
        ("Cold War",
         "The Cold War shaped world politics for decades. It ended as the Eastern Bloc "
         "collapsed in 1989. Treaties followed."),
        ("Checkpoint Charlie",
         "Checkpoint Charlie was a crossing point in Berlin. Tanks faced each other there in "
         "1961. It is now a museum."),
    ]),
    ("Which planet is known as the Red Planet?", ["Mars"], [
        ("Mars",
         "Mars is often called the Red Planet. Iron oxide gives its surface a reddish colour. "
         "Two small moons orbit it."),
        ("Jupiter",
         "Jupiter is the largest planet. It has a Great Red Spot. The spot is a giant storm."),
        ("Olympus Mons",
         "Olympus Mons is a huge volcano on Mars. It is taller than Everest. The volcano is "
         "extinct."),
    ]),
    ("Who painted the Mona Lisa?", ["Leonardo da Vinci", "Leonardo"], [
        ("Mona Lisa",
         "The Mona Lisa was painted by Leonardo da Vinci. It hangs in the Louvre. Millions "
         "visit it each year."),
        ("Louvre",
         "The Louvre is a museum in Paris. It was once a royal palace. Its glass pyramid opened "
         "in 1989."),
        ("Renaissance",
         "The Renaissance began in Italy. Leonardo was one of its leading artists. Science and "
         "art flourished."),
    ]),
    ("What is the largest ocean on Earth?", ["Pacific Ocean", "Pacific"], [
        ("Pacific Ocean",
         "The Pacific Ocean is the largest ocean on Earth. It covers about a third of the "
         "surface. The Mariana Trench lies within it."),
        ("Atlantic Ocean",
         "The Atlantic Ocean separates Europe and America. It is the second largest ocean. "
         "Ships have crossed it for centuries."),
        ("Mariana Trench",
         "The Mariana Trench is the deepest known point. It lies in the western Pacific. "
         "Few expeditions reached the bottom."),
    ]),
    ("Who developed the theory of general relativity?", ["Albert Einstein", "Einstein"], [
        ("General relativity",
         "General relativity was published by Albert Einstein in 1915. It describes gravity "
         "as curved spacetime. Tests confirmed it."),
        ("Isaac Newton",
         "Isaac Newton formulated the laws of motion. His theory of gravity lasted centuries. "
         "He also studied optics."),
        ("Eclipse of 1919",
         "The eclipse of 1919 tested a famous prediction. Light bent around the Sun. Einstein "
         "became world famous."),
    ]),
    ("What is the tallest mountain in the world?", ["Mount Everest", "Everest"], [
        ("Mount Everest",
         "Mount Everest is the tallest mountain above sea level. It stands on the border of "
         "Nepal and China. Climbers first summited in 1953."),
        ("K2",
         "K2 is the second highest mountain. It is known as the savage mountain. Its slopes "
         "are steep."),
        ("Himalayas",
         "The Himalayas stretch across Asia. They contain many high peaks. Everest is the "
         "highest of them."),
    ]),
]

DOC_WEIGHTS = [0.9, 0.8, 0.7]


def contains(text, answers):
    folded = " ".join(text.split()).lower()
    return any(" ".join(a.split()).lower() in folded for a in answers)


def main():
    queries, corpus, embeddings, reader_rules = [], [], [], []
    dim = len(TOPICS)
    for t, (question, answers, docs) in enumerate(TOPICS):
        qid = f"q{t + 1:02d}"
        queries.append({"id": qid, "question": question, "answers": answers})
        qvec = [0.0] * dim
        qvec[t] = 1.0
        embeddings.append({"id": qid, "vector": qvec})
        for k, (title, text) in enumerate(docs):
            did = f"d{t + 1:02d}{'abc'[k]}"
            corpus.append({"doc_id": did, "title": title, "text": text})
            vec = [0.01 * ((t + 3 * k + j) % 5) for j in range(dim)]
            vec[t] = DOC_WEIGHTS[k]
            embeddings.append({"id": did, "vector": vec})
        reader_rules.append({"path": "chat/completions",
                             "all_contains": [f"Question: {question}\nAnswer:"],
                             "hash_choice": [answers[-1], answers[0], "NO-RES"]})

    rules = [
        {"path": "embeddings", "embedding": "hash", "dim": dim},
        {"path": "completions", "synthetic_logprobs": True},
        {"model": "nli", "hash_choice": ["entailment", "Entailment.", "entailment", "neutral"]},
        {"all_contains": ["The length of the Sentences List is "],
         "permutation_after": "The length of the Sentences List is "},
        {"all_contains": ["Here is the passage to simplify:"],
         "echo_after": "Here is the passage to simplify:"},
        {"all_contains": ["Here is the passage to complexify:"],
         "echo_after": "Here is the passage to complexify:"},
        {"all_contains": ["Here is the passage to paraphrase:"],
         "echo_after": "Here is the passage to paraphrase:"},
    ] + reader_rules

    config = {
        "endpoint": {"base_url": "mock:mock.jsonl", "timeout_ms": 10000},
        "models": {"reader": "reader-a", "perturber": "perturber", "nli": "nli",
                   "judge": "judge", "embedder": "embedder"},
        "gen": {"temperature": 0.0, "max_tokens": 16},
        "concurrency": {"max_in_flight": 4},
        "retry": {"max_retries": 2, "backoff_ms": 1},
        "paths": {"queries": "queries.jsonl", "corpus": "corpus.jsonl",
                  "embeddings": "embeddings.jsonl", "workdir": "work"},
        "seed": 2024,
        "answer_policy": {"case_fold": True, "whitespace_collapse": True},
        "retrieval": {"k": 3},
        "perturb": {"kinds": "style,source,logic,format,meta"},
        "distill": {"models": ["reader-a", "reader-b"], "quota": 3},
        "export": {"mode": "both"},
        "prelim": {"features": ["flesch", "distinct1", "ppl", "toklen"]},
    }

    def write_jsonl(name, rows):
        (HERE / name).write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows))

    write_jsonl("queries.jsonl", queries)
    write_jsonl("corpus.jsonl", corpus)
    write_jsonl("embeddings.jsonl", embeddings)
    write_jsonl("mock.jsonl", rules)
    (HERE / "config.json").write_text(json.dumps(config, indent=2) + "\n")

    golden = sum(contains(d["text"], q["answers"]) for q in queries for d in corpus
                 if d["doc_id"][1:3] == q["id"][1:])
    print(f"{len(queries)} queries, {len(corpus)} documents, {golden} golden instances")


if __name__ == "__main__":
    main()
