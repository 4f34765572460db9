"""Time the embedding SGD sweep under the compiled and pure-Python backends.

    python benchmarks/bench_backends.py --docs 200 --dim 50 --repeat 3

Both backends draw identical negatives, so the trained matrices are also
compared; the maximum absolute difference should be at rounding level.
"""

import argparse
import time

import numpy as np

from jasen import backend, corpus, synthetic
from jasen.embedding import EmbedHyperparams, train_embeddings


def run(name, docs, vocab, schema, hp):
    start = time.perf_counter()
    model, _ = train_embeddings(docs, vocab, schema, hp, backend=name)
    return time.perf_counter() - start, model


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--docs", type=int, default=200)
    ap.add_argument("--dim", type=int, default=50)
    ap.add_argument("--epochs", type=int, default=2)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    sc = synthetic.generate(n_train=args.docs, n_test=0, seed=0)
    vocab = corpus.build_vocabulary((corpus.tokenize(t) for t in sc.train_texts), 1)
    docs = corpus.encode_corpus(sc.train_texts, vocab)
    hp = EmbedHyperparams(dim=args.dim, epochs=args.epochs)
    n_tokens = sum(len(d) for d in docs) * args.epochs

    names = ["python"] + (["cython"] if backend._compiled is not None else [])
    best, models = {}, {}
    for name in names:
        times = []
        for _ in range(args.repeat):
            t, models[name] = run(name, docs, vocab, sc.schema, hp)
            times.append(t)
        best[name] = min(times)
        print(f"{name:<8} best of {args.repeat}: {best[name]:.3f}s "
              f"({n_tokens / best[name]:,.0f} tokens/s)")
    if len(names) == 2:
        diff = max(float(np.abs(getattr(models["python"], m) - getattr(models["cython"], m)).max())
                   for m in ("center", "context", "docs", "joint_topics"))
        print(f"speedup  {best['python'] / best['cython']:.1f}x, max |difference| {diff:.2e}")
    else:
        print("compiled backend not built; run `pip install -e . --no-build-isolation`")


if __name__ == "__main__":
    main()
