"""Independent TF-IDF oracle for tfidf_corpus.jsonl: w = tf * ln(N / df)."""
import json, math, re, sys
from collections import Counter
from pathlib import Path

here = Path(__file__).parent
docs = [json.loads(l) for l in (here / "tfidf_corpus.jsonl").read_text().splitlines() if l.strip()]

def tokens(text):
    out = []
    for t in re.split(r"[^A-Za-z0-9]+", text):
        t = t.lower()
        if len(t) >= 2 and not t.isdigit():
            out.append(t)
    return out

counts = {d["id"]: Counter(tokens(d["title"] + " " + d["description"])) for d in docs}
df = Counter()
for c in counts.values():
    df.update(c.keys())
n = len(docs)
weights = {i: {t: tf * math.log(n / df[t]) for t, tf in c.items() if df[t] < n} for i, c in counts.items()}
json.dump({"n_docs": n, "doc_freq": dict(sorted(df.items())), "weights": weights},
          open(here / "tfidf_expected.json", "w"), indent=1, sort_keys=True)
