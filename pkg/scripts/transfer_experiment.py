"""Transfer study: does masked-image pre-training beat a random encoder?

Protocol: pre-train an 8-dimensional encoder on 256 benign/malignant
phantoms (4 Dirichlet clients), then train linear probes (5 seeds) on a
separate 300-sample set and score a 200-sample held-out set. Convex-mode
images are unwarped to linear before feature extraction so both scan
modes share a feature space, and features are standardized with
training-split statistics. The random-encoder arm repeats the probe
training on freshly initialized encoders.
"""

import argparse
import time

import numpy as np

from fedmim import fed, metrics, model, smat, synth
from fedmim.corrupt import CorruptionConfig
from fedmim.finetune import ProbeConfig, extract_features, probe_scores, train_probe
from fedmim.pipeline import PatchSpec, build_clients
from fedmim.rng import Rng

LESION_KWARGS = dict(
    intensity_delta=-75.0, malignant_delta=-95.0, irregularity_range=(0.6, 1.0)
)


def mode_normalized(samples, geom):
    return [
        smat.convex_to_linear(s.image, geom, 64, 64)
        if s.mode == smat.CONVEX else s.image
        for s in samples
    ]


def probe_auroc(params, cfg, probe_images, probe_labels, held_images, held_labels,
                seed):
    feats = extract_features(params, cfg, probe_images, 8, 8)
    held = extract_features(params, cfg, held_images, 8, 8)
    n = feats.shape[0]
    order = list(range(n))
    Rng(seed).shuffle(order)
    train_idx = np.array(order[int(round(0.2 * n)):])
    mu = feats[train_idx].mean(axis=0)
    sd = feats[train_idx].std(axis=0) + 1e-12
    result = train_probe(
        (feats - mu) / sd, probe_labels, ProbeConfig(num_classes=2, seed=seed)
    )
    scores = probe_scores(result.probe_params, (held - mu) / sd, 2)[:, 1]
    return metrics.auroc(scores, held_labels)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--rounds", type=int, default=300)
    args = ap.parse_args()

    base = synth.PhantomSpec()
    geom = smat.ScanGeometry.default_for(64, 64)
    t0 = time.time()
    corpus = synth.generate_dataset(
        256, (0.5, 0.5, 0.0), Rng(args.seed), base, lesion_kwargs=LESION_KWARGS
    )
    probe_set = synth.generate_dataset(
        300, (0.5, 0.5, 0.0), Rng(9), base, lesion_kwargs=LESION_KWARGS
    )
    held_out = synth.generate_dataset(
        200, (0.5, 0.5, 0.0), Rng(8), base, lesion_kwargs=LESION_KWARGS
    )
    print(f"datasets: {time.time() - t0:.1f}s")

    model_cfg = model.ModelConfig(
        patch_dim=64, embed_dim=8, num_patches=64, seed=args.seed
    )
    clients = build_clients(
        corpus, 4, 0.5, model_cfg, CorruptionConfig(), PatchSpec(8, 8, 0.75),
        args.seed,
    )
    fed_cfg = fed.FederationConfig(
        num_clients=4, total_rounds=args.rounds, local_steps=8,
        opt=model.OptimizerConfig(0.15, 1e-4, 10, args.rounds), seed=args.seed,
    )
    t0 = time.time()
    pretrained, trace = fed.run_pretraining(
        fed_cfg, model_cfg, clients, model.init_params(model_cfg)
    )
    print(f"pretrain: {time.time() - t0:.1f}s  "
          f"loss {trace[0][1]:.4f} -> {trace[-1][1]:.4f}")

    probe_images = mode_normalized(probe_set, geom)
    probe_labels = np.array([s.label for s in probe_set])
    held_images = mode_normalized(held_out, geom)
    held_labels = np.array([s.label for s in held_out])

    aucs_pre, aucs_rand = [], []
    for seed in range(5):
        aucs_pre.append(probe_auroc(
            pretrained, model_cfg, probe_images, probe_labels,
            held_images, held_labels, seed,
        ))
        rand_cfg = model.ModelConfig(64, 8, 64, seed=1000 + seed)
        aucs_rand.append(probe_auroc(
            model.init_params(rand_cfg), rand_cfg, probe_images, probe_labels,
            held_images, held_labels, seed,
        ))

    mean_pre, half_pre = metrics.ci95(aucs_pre)
    mean_rand, half_rand = metrics.ci95(aucs_rand)
    print("pretrained AUROC", np.round(aucs_pre, 3),
          f"mean {mean_pre:.3f} +/- {half_pre:.3f}")
    print("random     AUROC", np.round(aucs_rand, 3),
          f"mean {mean_rand:.3f} +/- {half_rand:.3f}")
    print(f"gap {mean_pre - mean_rand:.3f}  "
          f"t-test p {metrics.t_test(aucs_pre, aucs_rand):.2e}")


if __name__ == "__main__":
    main()
