#!/usr/bin/env python3
"""Regenerates the tiny random-weight checkpoints under tests/fixtures/models.

Each directory holds an HF-format checkpoint (config.json, model.safetensors,
tokenizer.json) plus expected.json with token ids, offsets and per-layer hidden
states computed by PyTorch/transformers. The C++ encoder tests compare against
expected.json, so this script is the independent reference for the encoder.

Requires: torch, transformers, tokenizers, sentencepiece.
"""
import json
import os
import shutil
import sys
import tempfile

import torch
import transformers
from tokenizers import ByteLevelBPETokenizer
import sentencepiece as spm

OUT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "models")

CORPUS = [
    "The Eastern Star capsized on 1 June near Jianli in Hubei province.",
    "Just 14 of the 456 passengers and crew are known to have survived.",
    "A search is continuing for eight people who remain missing.",
    "The channel recently said its signal was carried by 22 satellites.",
    "That step has become a huge challenge for opposition candidates.",
    "West Mercia Police said the police do not encourage members of the public.",
    "He says his work has led to two arrests in four weeks.",
    "Although it rained, the match continued while fans waited outside.",
    "Café owners in Zürich didn't expect the naïve résumé!",
    "Prices rose 3.5% in 2019, and analysts weren't surprised.",
    "I'm sure we'll see what they've done, isn't it?",
    "The report was released yesterday because officials wanted clarity.",
    "She said that the plan would fail unless funding arrived.",
    "Meanwhile, the committee, which met on Monday, rejected the bill.",
    "北京 is the capital city and 東京 is another city.",
]

TOKENIZER_PROBES = [
    "Hello, world!",
    "The Eastern Star capsized near Jianli.",
    "  Multiple   spaces\tand\ttabs  ",
    "Café owners didn't expect naïve résumés.",
    "Prices rose 3.5% in 2019; they've said it's fine.",
    "北京东京 mixed text",
    "unknownzzqx token",
    "Emoji 😀 test",
]

HIDDEN_PROBES_SINGLE = [
    "The Eastern Star capsized near Jianli.",
    "A search is continuing for eight people who remain missing.",
]
HIDDEN_PROBES_PAIR = [
    ("Just 14 of the passengers survived.", "A search is continuing."),
]

BERT_WORDS = """the a an is are was were of in on and to for he she it they we i said
says near star eastern search people remain missing just passengers crew survived
channel signal carried satellites step challenge police public work arrests weeks
although rained match continued while fans waited outside prices rose analysts
report released because officials wanted plan would fail unless funding arrived
meanwhile committee which met monday rejected bill hello world cafe owners didn
expect naive resume capital city another mixed text multiple spaces and tabs
emoji test token fine eight who continuing june province capsized""".split()
BERT_PIECES = ["##s", "##ed", "##ing", "##ly", "##er", "##es", "##t", "##n", "##a",
               "##e", "##i", "##o", "##u", "##r", "##l", "##x", "##q", "##z", "##k",
               "##y", "##m", "##5", "##9", "##1", "##0", "##2"]


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, ensure_ascii=False, indent=1)


def bert_vocab(path):
    specials = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
    chars = list("abcdefghijklmnopqrstuvwxyz0123456789.,!?;:'%-\"()") + ["北", "京", "东", "東"]
    vocab = specials + chars + BERT_WORDS + BERT_PIECES
    seen = []
    for v in vocab:
        if v not in seen:
            seen.append(v)
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(seen) + "\n")
    return len(seen)


def train_bpe(dirname):
    tok = ByteLevelBPETokenizer()
    tok.train_from_iterator(CORPUS * 3, vocab_size=420, min_frequency=1,
                            special_tokens=["<s>", "<pad>", "</s>", "<unk>", "<mask>"])
    tok.save_model(dirname)
    return os.path.join(dirname, "vocab.json"), os.path.join(dirname, "merges.txt")


def train_spm(dirname, prefix, **kw):
    text = os.path.join(dirname, "corpus.txt")
    with open(text, "w", encoding="utf-8") as f:
        f.write("\n".join(CORPUS * 3) + "\n")
    spm.SentencePieceTrainer.train(input=text, model_prefix=os.path.join(dirname, prefix),
                                   vocab_size=160, model_type="unigram",
                                   character_coverage=1.0, **kw)
    return os.path.join(dirname, prefix + ".model")


def spm_tokenizer(cls, model_path, **kw):
    d = os.path.join(os.path.dirname(model_path), os.path.basename(model_path) + ".dir")
    os.makedirs(d, exist_ok=True)
    shutil.copy(model_path, os.path.join(d, "spiece.model"))
    return cls.from_pretrained(d, **kw)


def tokenizer_expectations(tok):
    out = []
    for text in TOKENIZER_PROBES:
        enc = tok(text, add_special_tokens=False, return_offsets_mapping=True)
        out.append({"text": text, "ids": enc["input_ids"],
                    "offsets": [list(o) for o in enc["offset_mapping"]]})
    pair = tok("first part.", "second part!", add_special_tokens=True)
    single = tok("first part.", add_special_tokens=True)
    return out, {"single": single["input_ids"], "pair": pair["input_ids"]}


def char_to_byte_offsets(text, offsets):
    # transformers reports character offsets; the C++ side uses UTF-8 byte offsets
    prefix = [0]
    for ch in text:
        prefix.append(prefix[-1] + len(ch.encode("utf-8")))
    return [[prefix[a], prefix[b]] for a, b in offsets]


def hidden_expectations(model, tok, kind):
    cases = []
    model.eval()
    with torch.no_grad():
        inputs = []
        for t in HIDDEN_PROBES_SINGLE:
            inputs.append(({"text": t}, tok(t, return_tensors="pt")))
        for a, b in HIDDEN_PROBES_PAIR:
            inputs.append(({"text": a, "text_pair": b}, tok(a, b, return_tensors="pt")))
        for meta, enc in inputs:
            ids = enc["input_ids"]
            case = dict(meta)
            case["input_ids"] = ids[0].tolist()
            if kind == "encdec":
                if hasattr(model, "_shift_right"):
                    dec_in = model._shift_right(ids)
                else:
                    from transformers.models.bart.modeling_bart import shift_tokens_right
                    dec_in = shift_tokens_right(ids, model.config.pad_token_id,
                                                model.config.decoder_start_token_id)
                out = model(input_ids=ids, decoder_input_ids=dec_in, output_hidden_states=True)
                case["decoder_input_ids"] = dec_in[0].tolist()
                hs = list(out.encoder_hidden_states[1:]) + list(out.decoder_hidden_states[1:])
            else:
                kwargs = {}
                if "token_type_ids" in enc:
                    kwargs["token_type_ids"] = enc["token_type_ids"]
                out = model(input_ids=ids, output_hidden_states=True, **kwargs)
                hs = list(out.hidden_states[1:])
                if "token_type_ids" in enc:
                    case["token_type_ids"] = enc["token_type_ids"][0].tolist()
            case["hidden_states"] = [[[round(float(x), 6) for x in row] for row in h[0]] for h in hs]
            cases.append(case)
    return cases


def finish(name, model, tok, kind, tokenizer_json_source_dir):
    d = os.path.join(OUT, name)
    os.makedirs(d, exist_ok=True)
    model.save_pretrained(d, safe_serialization=True)
    tok.save_pretrained(tokenizer_json_source_dir)
    with open(os.path.join(tokenizer_json_source_dir, "tokenizer.json"), encoding="utf-8") as f:
        tj = json.load(f)
    write_json(os.path.join(d, "tokenizer.json"), tj)
    for extra in ("generation_config.json",):
        p = os.path.join(d, extra)
        if os.path.exists(p):
            os.remove(p)
    probes, templates = tokenizer_expectations(tok)
    for p in probes:
        p["offsets"] = char_to_byte_offsets(p["text"], p["offsets"])
    expected = {"tokenizer": probes, "templates": templates,
                "hidden": hidden_expectations(model, tok, kind)}
    write_json(os.path.join(d, "expected.json"), expected)
    print("wrote", d)


def main():
    torch.manual_seed(0)
    common = dict(hidden_size=32, num_attention_heads=4, intermediate_size=64,
                  max_position_embeddings=128)
    with tempfile.TemporaryDirectory() as tmp:
        # BERT (WordPiece)
        vocab = os.path.join(tmp, "vocab.txt")
        n = bert_vocab(vocab)
        tok = transformers.BertTokenizer(vocab=vocab, do_lower_case=True)
        cfg = transformers.BertConfig(vocab_size=n, num_hidden_layers=3, **common)
        finish("tiny-bert", transformers.BertModel(cfg), tok, "enc", os.path.join(tmp, "bert"))

        # ELECTRA discriminator with embedding projection
        cfg = transformers.ElectraConfig(vocab_size=n, embedding_size=16, num_hidden_layers=2, **common)
        tok = transformers.BertTokenizer(vocab=vocab, do_lower_case=True)
        finish("tiny-electra", transformers.ElectraModel(cfg), tok, "enc", os.path.join(tmp, "electra"))

        # Byte-level BPE family
        bpe_dir = os.path.join(tmp, "bpe")
        os.makedirs(bpe_dir)
        vj, mt = train_bpe(bpe_dir)
        nb = len(json.load(open(vj)))
        tok = transformers.RobertaTokenizer(vocab=vj, merges=mt)
        cfg = transformers.RobertaConfig(vocab_size=nb, num_hidden_layers=2, pad_token_id=1,
                                         bos_token_id=0, eos_token_id=2, type_vocab_size=1,
                                         **{**common, "max_position_embeddings": 130})
        finish("tiny-roberta", transformers.RobertaModel(cfg), tok, "enc", os.path.join(tmp, "roberta"))

        tok = transformers.GPT2Tokenizer(vocab=vj, merges=mt)
        cfg = transformers.GPT2Config(vocab_size=nb, n_embd=32, n_layer=2, n_head=4, n_positions=128,
                                      bos_token_id=0, eos_token_id=2)
        finish("tiny-gpt2", transformers.GPT2Model(cfg), tok, "dec", os.path.join(tmp, "gpt2"))

        tok = transformers.BartTokenizer(vocab=vj, merges=mt)
        cfg = transformers.BartConfig(vocab_size=nb, d_model=32, encoder_layers=2, decoder_layers=2,
                                      encoder_attention_heads=4, decoder_attention_heads=4,
                                      encoder_ffn_dim=64, decoder_ffn_dim=64,
                                      max_position_embeddings=128, pad_token_id=1, bos_token_id=0,
                                      eos_token_id=2, decoder_start_token_id=2)
        finish("tiny-bart", transformers.BartModel(cfg), tok, "encdec", os.path.join(tmp, "bart"))

        # SentencePiece unigram family
        spm_dir = os.path.join(tmp, "spm")
        os.makedirs(spm_dir)
        albert_model = train_spm(spm_dir, "albert", pad_id=0, unk_id=1, bos_id=-1, eos_id=-1,
                                 user_defined_symbols=["[CLS]", "[SEP]", "[MASK]"],
                                 normalization_rule_name="nmt_nfkc_cf")
        tok = spm_tokenizer(transformers.AlbertTokenizer, albert_model)
        cfg = transformers.AlbertConfig(vocab_size=tok.vocab_size, embedding_size=16, num_hidden_layers=3,
                                        pad_token_id=0, **common)
        finish("tiny-albert", transformers.AlbertModel(cfg), tok, "enc", os.path.join(tmp, "albert"))

        t5_model = train_spm(spm_dir, "t5", pad_id=0, eos_id=1, unk_id=2, bos_id=-1)
        tok = spm_tokenizer(transformers.T5Tokenizer, t5_model, extra_ids=0)
        cfg = transformers.T5Config(vocab_size=tok.vocab_size, d_model=32, d_kv=8, d_ff=64, num_layers=2,
                                    num_decoder_layers=2, num_heads=4, relative_attention_num_buckets=8,
                                    relative_attention_max_distance=20, pad_token_id=0, eos_token_id=1,
                                    decoder_start_token_id=0)
        finish("tiny-t5", transformers.T5Model(cfg), tok, "encdec", os.path.join(tmp, "t5"))


if __name__ == "__main__":
    sys.exit(main())
