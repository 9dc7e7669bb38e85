#!/usr/bin/env python3
"""Regenerates the bundled demo corpus under fixtures/.

Texts are synthetic: LLM-style texts favour connective phrases, paragraph
breaks and sparse commas; human-style texts favour colloquial particles,
dense commas and repeated punctuation. A share of each class borrows the
other's style so no single detector is perfect.
"""

import json
import math
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent / "fixtures"

TOPICS = ["城市交通", "在线教育", "传统节日", "家庭理财", "健康饮食", "人工智能", "旅游出行", "读书习惯",
          "环境保护", "职场沟通", "体育锻炼", "社区生活"]
NOUNS = ["问题", "方式", "影响", "经验", "变化", "选择", "习惯", "压力", "机会", "细节", "环境", "效率"]
VERBS = ["提升", "改变", "关注", "理解", "分析", "推动", "解决", "面对", "考虑", "保持"]

LLM_OPENERS = ["首先", "其次", "此外", "同时", "值得注意的是", "从长远来看", "另一方面"]
LLM_CLOSERS = ["总而言之", "综上所述", "总的来说"]
HUMAN_BITS = ["说实话", "哈哈", "我觉得吧", "真的", "有点", "挺好的", "其实", "反正", "唉"]
HUMAN_ENDS = ["吧。", "呢。", "啊！", "！！", "……", "。", "？？"]


def llm_sentence(rng, topic):
    return (f"{rng.choice(LLM_OPENERS)}，{topic}的{rng.choice(NOUNS)}需要我们{rng.choice(VERBS)}"
            f"相关{rng.choice(NOUNS)}并{rng.choice(VERBS)}整体{rng.choice(NOUNS)}。")


def human_sentence(rng, topic):
    return (f"{rng.choice(HUMAN_BITS)}，{topic}这事，{rng.choice(NOUNS)}{rng.choice(['挺', '有点', '太'])}"
            f"{rng.choice(['麻烦', '有意思', '难', '简单'])}，{rng.choice(VERBS)}起来{rng.choice(HUMAN_ENDS)}")


def make_text(rng, llm, target):
    topic = rng.choice(TOPICS)
    # A quarter of each class is written in the other class's style.
    style_llm = llm if rng.random() < 0.75 else not llm
    parts = []
    length = 0
    while length < target:
        s = llm_sentence(rng, topic) if style_llm else human_sentence(rng, topic)
        parts.append(s)
        length += len(s)
    if style_llm:
        if len(parts) > 2 and rng.random() < 0.7:
            parts.insert(len(parts) // 2, "\n\n")
        if rng.random() < 0.6:
            parts.append(f"{rng.choice(LLM_CLOSERS)}，{topic}值得持续{rng.choice(VERBS)}。")
    return "".join(parts)


def lengths(rng, n):
    buckets = [(20, 70), (80, 145), (160, 290), (310, 600)]
    return [rng.randint(*buckets[i % 4]) for i in range(n)]


def corpus(rng, prefix, n, tags):
    rows = []
    for i, target in enumerate(lengths(rng, n)):
        # Labels alternate in blocks of four so every length bucket holds both.
        llm = (i // 4) % 2 == 0
        row = {"id": f"{prefix}{i:04d}", "text": make_text(rng, llm, target), "label": int(llm)}
        if tags:
            row["subset"] = tags[i % len(tags)]
        rows.append(row)
    return rows


def excerpt(rng, text, n):
    if len(text) <= n:
        return text
    start = rng.randint(0, len(text) - n)
    return text[start:start + n]


def paraphrase(text):
    swaps = [("需要我们", "要求我们"), ("相关", "有关"), ("整体", "总体"), ("首先", "第一"), ("此外", "另外")]
    for a, b in swaps:
        text = text.replace(a, b)
    return text


def write_jsonl(path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for r in rows:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")


def main():
    rng = random.Random(20240917)
    train = corpus(rng, "tr", 320, None)
    test = corpus(rng, "te", 160, ["normal"])

    # Attack subsets of the test set: excerpts and recorded paraphrases.
    mt_pairs = []
    for i, row in enumerate(test):
        attack = (i // 8) % 4
        if attack == 1:
            row["text"] = excerpt(rng, row["text"], 64)
            row["subset"] = "len-64"
        elif attack == 2:
            pivot = "[en] " + row["text"]
            mt_pairs.append({"in": row["text"], "out": pivot})
            mt_pairs.append({"in": pivot, "out": paraphrase(row["text"])})
            row["subset"] = "paraphrase"
            row["text"] = paraphrase(row["text"])

    def fast_detect(row):
        base = 1.6 if row["label"] else 0.0
        return round(rng.gauss(base, 1.0) - 0.4 * math.log(1 + len(row["text"]) / 100), 6)

    def binoculars(row):
        return round(rng.gauss(0.82 if row["label"] else 0.95, 0.06), 6)

    # The sidecar also scores the transformed copies used for reliability.
    transformed = [dict(r, id=r["id"] + suffix) for r in test for suffix in ("#id", "#ex64", "#bten")]
    all_rows = train + test
    scored_rows = all_rows + transformed
    write_jsonl(ROOT / "train.jsonl", train)
    write_jsonl(ROOT / "test.jsonl", test)
    write_jsonl(ROOT / "scores" / "fast_detectgpt_qwen.jsonl",
                [{"id": r["id"], "score": fast_detect(r)} for r in scored_rows])
    write_jsonl(ROOT / "scores" / "binoculars_qwen.jsonl",
                [{"id": r["id"], "score": binoculars(r)} for r in scored_rows])

    support = []
    for r in all_rows:
        right = rng.random() < 0.85
        sign = (1 if r["label"] else -1) * (1 if right else -1)
        support.append({"id": r["id"], "value": round(sign * rng.uniform(0.6, 1.0), 3)})
    write_jsonl(ROOT / "support_stub.jsonl", support)

    # Five back-translated LLM texts and five human originals.
    demos = []
    llm_rows = [r for r in train if r["label"] == 1][:5]
    human_rows = [r for r in train if r["label"] == 0][:5]
    for r in llm_rows:
        demos.append({"text": paraphrase(r["text"]), "label": 1})
    for r in human_rows:
        demos.append({"text": r["text"], "label": 0})
    write_jsonl(ROOT / "demonstrations.jsonl", demos)

    # Round trips for the reliability back-translation transform.
    for r in test:
        if r["subset"] == "paraphrase":
            continue
        pivot = "[en] " + r["text"]
        mt_pairs.append({"in": r["text"], "out": pivot})
        mt_pairs.append({"in": pivot, "out": paraphrase(r["text"])})
    write_jsonl(ROOT / "mt_stub.jsonl", mt_pairs)


if __name__ == "__main__":
    main()
