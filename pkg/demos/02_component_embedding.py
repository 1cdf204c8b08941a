"""Step 2 on its own: locality-regularized neighbor embedding.

Builds a training index for the eye component from a small synthetic
corpus, then reconstructs the residual of an unseen face from its
nearest neighbors. Shows how the locality penalty shifts weight toward
close training examples.
"""

import numpy as np

from tinyface import (TrainingIndex, default_layout, embed_component, knn,
                      locality_adaptor, solve_weights, split)
from tinyface.synthetic import make_corpus


def main():
    layout = default_layout()
    corpus = make_corpus(21, seed=5, size=128)
    train, probe = corpus[:20], corpus[20]

    # pretend the low-frequency versions are blurred copies; the index
    # maps blurred component -> missing high-frequency residual
    from scipy.ndimage import gaussian_filter
    blur = [gaussian_filter(im, sigma=(2, 2, 0)) for im in train]
    feats = np.stack([split(b, layout).vectors["eyes"] for b in blur])
    resid = np.stack([split(t, layout).vectors["eyes"] for t in train]) - feats
    index = TrainingIndex("eyes", feats, resid)

    q = split(gaussian_filter(probe, sigma=(2, 2, 0)), layout).vectors["eyes"]
    truth = split(probe, layout).vectors["eyes"]

    res = knn(index, q, 5)
    print("nearest training faces:", res.indices.tolist())
    print("distances:", np.round(res.dists, 3).tolist())

    for lam in (0.0, 0.04, 1.0, 100.0):
        nb = index.features[res.indices].astype(float)
        w = solve_weights(q, nb, locality_adaptor(q, nb), lam)
        out = embed_component(index, q, 5, lam)
        err = np.abs(out - truth).mean()
        print(f"lambda_emb={lam:<6} weights={np.round(w, 3).tolist()}"
              f"  mean abs error={err:.5f}")

    base = np.abs(q - truth).mean()
    print(f"no embedding (input as-is): mean abs error={base:.5f}")


if __name__ == "__main__":
    main()
