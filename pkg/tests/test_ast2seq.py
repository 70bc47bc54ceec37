import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from commitgen.ast2seq import (Ast2Seq, EarlyStopping, Example, ModelConfig, generate, load_model,
                               lstm_cell, make_batch, save_model, train)
from commitgen.ast2seq.decode import greedy_decode
from commitgen.autodiff import Tensor, grad_check, no_grad
from commitgen.astpaths import AstPath, PathContextSet
from commitgen.errors import ConfigMismatch, EmptyContext, EmptyTrainingSet, MissingArtifact
from commitgen.preprocess import SOS_ID, Vocabulary
from oracles import lstm_step_np, luong_attention_np
from toy_models import PATH_A, PATH_B, PATH_C, contexts, tiny_model, vocabs

MESSAGES = [["add", "null", "check"], ["fix", "count"]]


def encode(model, v, ctxs):
    batch = make_batch(ctxs, v["subtoken"], polarity_embeddings=model.config.polarity_embeddings)
    with no_grad():
        return model.encode(batch), batch


# ---------------------------------------------------------------- encoder

def test_leaf_feature_is_subtoken_sum():
    model, v = tiny_model()
    table = model.p("enc.sub_emb").data
    sub = v["subtoken"]
    batch = make_batch([PathContextSet(added=[PATH_A])], sub)
    feat = model.leaf_features(batch.start_sub, batch.start_mask).data[0]
    expected = table[sub.index("on")] + table[sub.index("or")] + table[sub.index("after")]
    assert_allclose(feat, expected, rtol=1e-6)


def test_leaf_feature_commutes():
    model, v = tiny_model()
    fwd = make_batch([PathContextSet(added=[AstPath("onOr", PATH_A.node_sequence, "x")])], v["subtoken"])
    rev = make_batch([PathContextSet(added=[AstPath("orOn", PATH_A.node_sequence, "x")])], v["subtoken"])
    f = model.leaf_features(fwd.start_sub, fwd.start_mask).data
    r = model.leaf_features(rev.start_sub, rev.start_mask).data
    assert_allclose(f, r, rtol=1e-6)


def test_polarity_uses_separate_rows():
    model, v = tiny_model()
    added = make_batch([PathContextSet(added=[PATH_B])], v["subtoken"])
    deleted = make_batch([PathContextSet(deleted=[PATH_B])], v["subtoken"])
    assert (deleted.start_sub[0, 0] - added.start_sub[0, 0]) == len(v["subtoken"])


def test_zero_parameters_give_zero_paths():
    model, v = tiny_model()
    model.params.fill(0.0)
    enc, _ = encode(model, v, contexts())
    assert not enc.Z.data.any() and not enc.h0.data.any()


def test_h0_is_mean_of_valid_rows():
    model, v = tiny_model()
    enc, batch = encode(model, v, contexts())
    assert enc.mask.tolist() == [[True, True, False], [True, True, True]]
    for b in range(2):
        rows = enc.Z.data[b][enc.mask[b]]
        assert_allclose(enc.h0.data[b], rows.mean(axis=0), atol=1e-5)
        assert not enc.Z.data[b][~enc.mask[b]].any()


def test_single_path_h0_equals_z():
    model, v = tiny_model()
    enc, _ = encode(model, v, [PathContextSet(added=[PATH_C])])
    assert enc.Z.shape == (1, 1, 8)
    assert_allclose(enc.h0.data[0], enc.Z.data[0, 0], rtol=1e-6)


def test_added_rows_precede_deleted_rows():
    model, v = tiny_model()
    both, _ = encode(model, v, [PathContextSet(added=[PATH_A], deleted=[PATH_B])])
    only_a, _ = encode(model, v, [PathContextSet(added=[PATH_A])])
    only_b, _ = encode(model, v, [PathContextSet(deleted=[PATH_B])])
    assert_allclose(both.Z.data[0, 0], only_a.Z.data[0, 0], rtol=1e-6)
    assert_allclose(both.Z.data[0, 1], only_b.Z.data[0, 0], rtol=1e-6)


def test_empty_context_rejected():
    _, v = tiny_model()
    with pytest.raises(EmptyContext):
        make_batch([PathContextSet()], v["subtoken"])


def test_path_permutation_invariance():
    model, v = tiny_model(scale=3.0)
    a = PathContextSet(added=[PATH_A, PATH_C, PATH_B], deleted=[PATH_B, PATH_C])
    b = PathContextSet(added=[PATH_B, PATH_A, PATH_C], deleted=[PATH_C, PATH_B])
    ea, _ = encode(model, v, [a])
    eb, _ = encode(model, v, [b])
    assert_allclose(ea.h0.data, eb.h0.data, atol=1e-6)
    assert greedy_decode(model, ea) == greedy_decode(model, eb)
    with no_grad():
        h = Tensor(np.random.default_rng(0).normal(size=(1, 8)))
        assert_allclose(model.attention(h, ea)[1].data, model.attention(h, eb)[1].data, atol=1e-6)


# ---------------------------------------------------------------- cells and attention

def test_lstm_cell_matches_oracle():
    rng = np.random.default_rng(0)
    x, h, c = rng.normal(size=(1, 3)), rng.normal(size=(1, 4)), rng.normal(size=(1, 4))
    w, b = rng.normal(size=(7, 16)), rng.normal(size=16)
    h_new, c_new = lstm_cell(Tensor(x), Tensor(h), Tensor(c), Tensor(w), Tensor(b))
    h_ref, c_ref = lstm_step_np(x[0], h[0], c[0], w, b)
    assert_allclose(h_new.data[0], h_ref, rtol=1e-5, atol=1e-6)
    assert_allclose(c_new.data[0], c_ref, rtol=1e-5, atol=1e-6)


def test_forget_gate_bias_is_one():
    model, _ = tiny_model()
    b = model.p("dec.lstm.b").data
    assert (b[8:16] == 1.0).all() and not b[:8].any() and not b[16:].any()


def test_attention_cases():
    model, v = tiny_model()
    single, _ = encode(model, v, [PathContextSet(added=[PATH_C])])
    h = Tensor(np.random.default_rng(1).normal(size=(1, 8)))
    with no_grad():
        alpha, ctx = model.attention(h, single)
        assert_allclose(alpha.data, [[1.0]])
        assert_allclose(ctx.data, single.Z.data[:, 0], rtol=1e-6)

        enc, _ = encode(model, v, contexts())
        h2 = Tensor(np.random.default_rng(2).normal(size=(2, 8)))
        model.p("dec.W_a").data[...] = 0.0
        alpha, _ = model.attention(h2, enc)
        assert_allclose(alpha.data, [[0.5, 0.5, 0.0], [1 / 3, 1 / 3, 1 / 3]], atol=1e-7)
        assert alpha.data[0, 2] == 0.0


def test_attention_matches_hand_evaluation():
    model, v = tiny_model()
    rng = np.random.default_rng(3)
    model.p("dec.W_a").data[...] = rng.normal(size=(8, 8))
    enc, _ = encode(model, v, [PathContextSet(added=[PATH_A], deleted=[PATH_B])])
    h = rng.normal(size=(1, 8))
    with no_grad():
        alpha, ctx = model.attention(Tensor(h), enc)
    ref_alpha, ref_ctx = luong_attention_np(h[0], enc.Z.data[0].astype(np.float64),
                                            model.p("dec.W_a").data.astype(np.float64))
    assert_allclose(alpha.data[0], ref_alpha, rtol=1e-5, atol=1e-7)
    assert_allclose(ctx.data[0], ref_ctx, rtol=1e-5, atol=1e-6)


def test_decode_step_matches_hand_evaluation():
    model, v = tiny_model(scale=2.0)
    enc, _ = encode(model, v, [PathContextSet(added=[PATH_A, PATH_C], deleted=[PATH_B])])
    y_prev = v["target"].index("fix")
    with no_grad():
        logits, _, _ = model.decode_step([y_prev], model.initial_state(enc), enc)
    P = {k: t.data.astype(np.float64) for k, t in model.params.params.items()}
    Z, h0 = enc.Z.data[0].astype(np.float64), enc.h0.data[0].astype(np.float64)
    h, _ = lstm_step_np(P["dec.tgt_emb"][y_prev], h0, np.zeros(8), P["dec.lstm.W"], P["dec.lstm.b"])
    _, ctx = luong_attention_np(h, Z, P["dec.W_a"])
    expected = np.tanh(np.concatenate([ctx, h]) @ P["dec.W_c"]) @ P["dec.W_s"]
    assert logits.shape == (1, len(v["target"]))
    assert_allclose(logits[0], expected, rtol=1e-4, atol=1e-5)


def test_zero_parameters_give_uniform_logits():
    model, v = tiny_model()
    model.params.fill(0.0)
    enc, _ = encode(model, v, contexts())
    with no_grad():
        logits, _, _ = model.decode_step([SOS_ID, SOS_ID], model.initial_state(enc), enc)
    assert not logits.any()


def test_dropout_only_in_training():
    model, v = tiny_model()
    batch = make_batch(contexts(), v["subtoken"], MESSAGES, v["target"])
    with no_grad():
        eval_a = model.logits(batch).data
        eval_b = model.logits(batch).data
        trained = model.logits(batch, training=True, rng=np.random.default_rng(0)).data
    np.testing.assert_array_equal(eval_a, eval_b)
    assert not np.allclose(eval_a, trained)


# ---------------------------------------------------------------- loss and gradients

def test_loss_with_zero_output_layer_is_ln_r():
    model, v = tiny_model()
    model.p("dec.W_s").data[...] = 0.0
    batch = make_batch(contexts(), v["subtoken"], MESSAGES, v["target"])
    with no_grad():
        loss = float(model.loss(batch).data)
    assert loss == pytest.approx(math.log(len(v["target"])), abs=1e-4)


def test_end_to_end_gradient_check():
    model, v = tiny_model(dropout=0.0)
    batch = make_batch([PathContextSet(added=[PATH_A], deleted=[PATH_B])], v["subtoken"],
                       [["add", "null", "check"]], v["target"])
    assert model.config.embed_dim <= 8 and model.config.hidden_dim <= 8
    report = grad_check(lambda: model.loss(batch), model.params, eps=1e-3, tol_rel=1e-2)
    assert report.passed, report.failures[:5]
    assert report.checked == model.params.num_scalars()


# ---------------------------------------------------------------- training

def test_early_stopping_counter():
    stopper = EarlyStopping(patience=20)
    stopped = None
    for epoch in range(1, 100):
        _, stop = stopper.update(epoch, float(epoch))  # strictly worsening
        if stop:
            stopped = epoch
            break
    assert stopped == 21 and stopper.best_epoch == 1


def test_empty_training_set():
    model, v = tiny_model()
    with pytest.raises(EmptyTrainingSet):
        train(model, [], [], v)


def test_one_sample_overfit():
    v = vocabs()
    model = Ast2Seq(len(v["subtoken"]), len(v["target"]), ModelConfig(lr=1e-3, patience=1000))
    ex = [Example(contexts()[0], ["add", "null", "check"])]
    report = train(model, ex, ex, v, epochs=200)
    assert report.train_loss[-1] < 0.01
    assert generate(model, [ex[0].contexts], v, beam_width=1) == [ex[0].message]
    assert generate(model, [ex[0].contexts], v, beam_width=5) == [ex[0].message]


def test_training_restores_best_and_is_deterministic():
    runs = []
    for _ in range(2):
        model, v = tiny_model(lr=1e-2)
        ex = [Example(c, m) for c, m in zip(contexts(), MESSAGES)]
        report = train(model, ex, ex, v, epochs=30)
        runs.append((model.params.to_bytes(), report.valid_loss))
        assert report.best_valid_loss == min(report.valid_loss)
    assert runs[0] == runs[1]


# ---------------------------------------------------------------- persistence

def test_save_load_roundtrip_and_mismatch(tmp_path):
    model, v = tiny_model()
    save_model(model, v, tmp_path)
    loaded = load_model(tmp_path, v)
    assert loaded.params.to_bytes() == model.params.to_bytes()
    assert loaded.config == model.config

    other = dict(v, target=Vocabulary("target", ["something", "else"]))
    with pytest.raises(ConfigMismatch):
        load_model(tmp_path, other)

    manifest = json.loads((tmp_path / "ast2seq.manifest.json").read_text())
    manifest["checkpoint_sha256"] = "0" * 64
    (tmp_path / "ast2seq.manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(ConfigMismatch):
        load_model(tmp_path, v)

    with pytest.raises(MissingArtifact):
        load_model(tmp_path / "nowhere", v)
