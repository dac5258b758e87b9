"""Score every prompt variant against replayed answers with controlled corruption.

No model is involved: each sample's ground-truth answer is degraded (drop
the last sentence, swap a sub-class label, append chatter) with a fixed
probability and the result is scored, which shows how the edit score and
accuracies react to each kind of error.
"""

import argparse
import random

from rallyseq.dataset import PromptVariant, build_dataset
from rallyseq.events import build_vocabulary
from rallyseq.runner import MockEndpoint, evaluate_run, run_batch
from rallyseq.synth import random_corpus

SWAPS = [("near", "far"), ("forehand", "backhand"), ("return", "stroke"), ("cross-court", "down the line")]


def corrupt(answer, rng, p):
    sentences = [s.strip() + "." for s in answer.split(".") if s.strip()]
    out = []
    for s in sentences:
        if rng.random() < p:
            a, b = rng.choice(SWAPS)
            s = s.replace(a, b) if a in s else s.replace(b, a)
        out.append(s)
    if len(out) > 1 and rng.random() < p:
        out.pop()
    if rng.random() < p:
        out.append("The crowd applauded.")
    return " ".join(out)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--rallies", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--noise", type=float, nargs="+", default=[0.0, 0.1, 0.3, 0.6])
    args = ap.parse_args()

    rallies = random_corpus(args.seed, args.rallies, 20)
    vocab = build_vocabulary(rallies)
    print(f"{len(rallies)} rallies, {len(vocab)} distinct events")
    print(f"{'variant':<20} {'noise':>5} {'edit':>6} {'pooled':>6} {'overall':>7} {'count acc':>9}")
    for kind in ("default_sequence", "frame_numbers", "event_count_given"):
        samples = build_dataset(rallies, PromptVariant(kind))
        for p in args.noise:
            rng = random.Random(args.seed)
            mock = MockEndpoint({s.sample_id: corrupt(s.answer, rng, p) for s in samples})
            preds, _ = run_batch(samples, mock, sleep=lambda _: None)
            r = evaluate_run(preds, rallies, vocab, variant=kind)
            print(
                f"{kind:<20} {p:>5.2f} {r.mean_edit_score:>6.1f} {r.pooled_edit_score:>6.1f} "
                f"{r.overall_accuracy:>7.2f} {r.count_stats.exact_match_accuracy:>9.2f}"
            )


if __name__ == "__main__":
    main()
