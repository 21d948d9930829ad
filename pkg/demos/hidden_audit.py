"""Library-level audit of undisclosed sponsorships.

Builds a corpus where some sponsored posts drop their disclosure hashtags,
trains the forest on the declared posts only, then sweeps the decision
threshold over the undeclared remainder and prints how many planted posts
are recovered per tier.

    python3 demos/hidden_audit.py [--posts 4000] [--seed 3]
"""

import argparse

from sponsorscope.classifiers import ForestClassifier
from sponsorscope.dataset import build_examples, split_train_test, undersample_balance
from sponsorscope.evaluation import detect_hidden, evaluate, format_metrics_table
from sponsorscope.ingest import Dataset
from sponsorscope.labeling import label_posts
from sponsorscope.synth import SynthConfig, generate_corpus


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--posts", type=int, default=4000)
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args()

    corpus = generate_corpus(SynthConfig(n_posts=args.posts, sponsored_fraction=0.2, hidden_fraction=0.08,
                                         seed=args.seed))
    plants = set(corpus.ids_with_status("hidden"))
    ds = corpus.dataset
    examples = build_examples(Dataset(ds.profiles, label_posts(ds.posts), ds.stories))
    train, test = split_train_test(undersample_balance(examples, args.seed), 0.2, args.seed)

    clf = ForestClassifier(seed=args.seed).fit(train)
    _, metrics = evaluate(clf, test)
    print(format_metrics_table({"forest": metrics}))

    seen = set(train.ids)
    undeclared = [e for e in examples if e.label == 0 and e.post_id not in seen]
    print(f"{len(undeclared)} undeclared posts, {len(plants)} planted sponsorships")
    for t in (0.3, 0.5, 0.7, 0.9):
        rep = detect_hidden(clf, undeclared, t, plants)
        tiers = ", ".join(f"{tier.title} {a.flagged}/{a.total}" for tier, a in rep.tiers.items())
        print(f"threshold {t:.1f}: flagged {rep.global_fraction:.3f}, plant recall {rep.recall:.3f} [{tiers}]")


if __name__ == "__main__":
    main()
