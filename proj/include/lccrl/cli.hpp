// Copyright 2026 The lccrl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lccrl/lccrl.hpp"
#include "lccrl/model_checks.hpp"

// Command-line front end. Exit codes: 0 success, 1 invalid input or usage,
// 2 runtime failure (including a failed gradient check).

namespace lccrl::cli {

inline constexpr Real kGradCheckTolerance = 1e-4;

struct DimFlags {
  std::string preset = "desk";
  std::optional<std::size_t> word_dim, speaker_dim, hidden, encoder_layers, context_hidden, context_layers,
      decoder_hidden, attention_dim, max_utterance_words;

  ModelDims resolve() const {
    if (preset != "desk" && preset != "large") throw ValidationError("unknown preset '" + preset + "'");
    ModelDims d = preset == "large" ? ModelDims::large() : ModelDims{};
    auto set = [](std::size_t& field, const std::optional<std::size_t>& v) {
      if (v) field = *v;
    };
    set(d.word_dim, word_dim);
    set(d.speaker_dim, speaker_dim);
    set(d.hidden, hidden);
    set(d.encoder_layers, encoder_layers);
    set(d.context_hidden, context_hidden);
    set(d.context_layers, context_layers);
    set(d.decoder_hidden, decoder_hidden);
    set(d.attention_dim, attention_dim);
    set(d.max_utterance_words, max_utterance_words);
    if (d.word_dim == 0 || d.speaker_dim == 0 || d.hidden == 0 || d.encoder_layers == 0 || d.context_hidden == 0 ||
        d.context_layers == 0 || d.decoder_hidden == 0) {
      throw ValidationError("model dimensions and layer counts must be positive");
    }
    return d;
  }
};

inline void add_dim_flags(CLI::App* cmd, DimFlags& f) {
  cmd->add_option("--preset", f.preset, "Dimension preset: desk or large")->capture_default_str();
  cmd->add_option("--word-dim", f.word_dim, "Word embedding size");
  cmd->add_option("--speaker-dim", f.speaker_dim, "Speaker embedding size");
  cmd->add_option("--hidden", f.hidden, "Utterance BLSTM units per direction");
  cmd->add_option("--encoder-layers", f.encoder_layers, "Utterance BLSTM layers");
  cmd->add_option("--context-hidden", f.context_hidden, "Past/future context LSTM units");
  cmd->add_option("--context-layers", f.context_layers, "Past/future context LSTM layers");
  cmd->add_option("--decoder-hidden", f.decoder_hidden, "Word decoder LSTM units");
  cmd->add_option("--attention-dim", f.attention_dim, "Attention projection size (0: hidden)");
  cmd->add_option("--max-utterance-words", f.max_utterance_words, "Decoder word limit (0: none)");
}

inline void add_train_flags(CLI::App* cmd, TrainConfig& c) {
  cmd->add_option("--batch", c.batch_size, "Conversations per update")->capture_default_str();
  cmd->add_option("--epochs", c.max_epochs, "Maximum epochs")->capture_default_str();
  cmd->add_option("--patience", c.patience, "Epochs without improvement before stopping")->capture_default_str();
  cmd->add_option("--heldout", c.heldout_fraction, "Fraction of conversations held out")->capture_default_str();
  cmd->add_option("--dropout", c.dropout, "Dropout rate")->capture_default_str();
  cmd->add_option("--lr", c.adam.learning_rate, "Adam learning rate")->capture_default_str();
  cmd->add_option("--clip", c.adam.clip_norm, "Gradient norm clip (0: off)")->capture_default_str();
  cmd->add_option("--restarts", c.restarts, "Models trained from different initial parameters")
      ->capture_default_str();
}

inline Corpus read_corpora(const std::vector<std::string>& paths) {
  Corpus all;
  for (const auto& p : paths) {
    Corpus c = parse_jsonl(p);
    all.insert(all.end(), std::make_move_iterator(c.begin()), std::make_move_iterator(c.end()));
  }
  return all;
}

/// The call scenes if they cover `names`, otherwise the sorted names.
inline LabelSet label_set_for(const std::set<std::string>& names) {
  if (names.empty()) throw ValidationError("no labels found");
  const LabelSet scenes = LabelSet::call_scenes();
  bool all_scenes = true;
  for (const auto& n : names) all_scenes = all_scenes && std::count(scenes.names().begin(), scenes.names().end(), n);
  return all_scenes ? scenes : LabelSet(std::vector<std::string>(names.begin(), names.end()));
}

inline LabelSet labels_of(const Corpus& corpus) {
  std::set<std::string> names;
  for (const auto& c : corpus) {
    if (!c.labels) throw ValidationError("conversation '" + c.id + "' has no labels");
    names.insert(c.labels->begin(), c.labels->end());
  }
  return label_set_for(names);
}

inline void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << contents;
  if (!out) throw Error("failed writing " + path);
}

template <typename Fn>
void write_with(const std::string& path, Fn fn) {
  std::ostringstream os;
  fn(os);
  write_file(path, os.str());
}

inline void apply_vectors(const std::string& path, bool freeze, const Vocabulary& vocab, ParamStore& params,
                          EmbeddingTable& table, std::ostream& err) {
  auto init = load_word_vectors(path, vocab);
  apply_word_vectors(init, table);
  if (freeze) params.set_frozen(table.name, true);
  err << "word vectors: " << init.covered << " words covered (" << std::fixed << std::setprecision(1)
      << 100.0 * init.coverage << "%)" << std::defaultfloat << '\n';
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

/// Parses and runs one command line.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"LC-CRL pre-training and speaker-aware utterance labeling"};
  app.name("lccrl");
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "Read options from a TOML/INI file");
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Seed for every random choice")->capture_default_str();

  // gen-synth
  auto* gen = app.add_subcommand("gen-synth", "Write a synthetic labeled corpus");
  std::size_t gen_num = 64;
  std::string gen_out, gen_spec = "default", gen_spec_file;
  bool gen_unlabeled = false;
  gen->add_option("--num", gen_num, "Number of conversations")->capture_default_str();
  gen->add_option("--out", gen_out, "Output JSONL")->required();
  gen->add_option("--spec", gen_spec, "Built-in spec: default or speaker-cue")->capture_default_str();
  gen->add_option("--spec-file", gen_spec_file, "Spec JSON file")->check(CLI::ExistingFile);
  gen->add_flag("--unlabeled", gen_unlabeled, "Drop the scene labels");

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "Self-supervised pre-training on unlabeled conversations");
  std::vector<std::string> pre_data, pre_vocab_data;
  std::string pre_out, pre_curve, pre_vectors;
  bool pre_freeze_vectors = false;
  std::size_t pre_min_count = 2;
  DimFlags pre_dims;
  TrainConfig pre_cfg;
  pre->add_option("--data", pre_data, "Unlabeled JSONL files")->required()->check(CLI::ExistingFile);
  pre->add_option("--vocab-data", pre_vocab_data, "Extra JSONL files counted for the vocabulary")
      ->check(CLI::ExistingFile);
  pre->add_option("--min-count", pre_min_count, "Minimum word count to enter the vocabulary")->capture_default_str();
  pre->add_option("--out", pre_out, "Checkpoint path")->required();
  pre->add_option("--curve", pre_curve, "Loss curve CSV");
  pre->add_option("--word-vectors", pre_vectors, "Pre-trained word vectors (text)")->check(CLI::ExistingFile);
  pre->add_flag("--freeze-word-vectors", pre_freeze_vectors, "Keep loaded word vectors fixed");
  add_dim_flags(pre, pre_dims);
  add_train_flags(pre, pre_cfg);

  // finetune
  auto* fin = app.add_subcommand("finetune", "Train the utterance labeler");
  std::vector<std::string> fin_data, fin_vocab_data, fin_labels;
  std::string fin_init, fin_out, fin_curve, fin_vectors, fin_report;
  bool fin_blind = false, fin_freeze = false, fin_allow = false, fin_rebuild = false, fin_freeze_vectors = false;
  std::size_t fin_min_count = 2;
  DimFlags fin_dims;
  FinetuneOptions fin_opt;
  fin->add_option("--data", fin_data, "Labeled JSONL files")->required()->check(CLI::ExistingFile);
  fin->add_option("--init", fin_init, "Pre-training checkpoint for the shared encoders")->check(CLI::ExistingFile);
  fin->add_option("--out", fin_out, "Labeler checkpoint path")->required();
  fin->add_option("--labels", fin_labels, "Label names in order (default: from the data)")->delimiter(',');
  fin->add_option("--vocab-data", fin_vocab_data, "Extra JSONL files counted for the vocabulary")
      ->check(CLI::ExistingFile);
  fin->add_option("--min-count", fin_min_count, "Minimum word count to enter the vocabulary")->capture_default_str();
  fin->add_flag("--rebuild-vocab", fin_rebuild, "With --init, build the vocabulary from the data instead");
  fin->add_flag("--allow-vocab-mismatch", fin_allow, "Transfer despite a different vocabulary");
  fin->add_flag("--speaker-blind", fin_blind, "Drop speaker vectors (H-BLSTM-CRF ablation)");
  fin->add_flag("--freeze-shared", fin_freeze, "Keep transferred encoder parameters fixed");
  fin->add_option("--curve", fin_curve, "Loss curve CSV");
  fin->add_option("--transfer-report", fin_report, "JSON report of the parameter transfer");
  fin->add_option("--word-vectors", fin_vectors, "Pre-trained word vectors (text)")->check(CLI::ExistingFile);
  fin->add_flag("--freeze-word-vectors", fin_freeze_vectors, "Keep loaded word vectors fixed");
  add_dim_flags(fin, fin_dims);
  add_train_flags(fin, fin_opt.train);

  // label
  auto* lab = app.add_subcommand("label", "Label conversations with a trained labeler");
  std::string lab_model, lab_data, lab_out;
  lab->add_option("--model", lab_model, "Labeler checkpoint")->required()->check(CLI::ExistingFile);
  lab->add_option("--data", lab_data, "JSONL to label")->required()->check(CLI::ExistingFile);
  lab->add_option("--out", lab_out, "Output JSONL (default: stdout)");

  // eval
  auto* ev = app.add_subcommand("eval", "Accuracy and per-label precision/recall/F-measure");
  std::string ev_model, ev_data, ev_predicted, ev_json, ev_csv;
  ev->add_option("--model", ev_model, "Labeler checkpoint")->check(CLI::ExistingFile);
  ev->add_option("--data", ev_data, "Gold labeled JSONL")->check(CLI::ExistingFile);
  ev->add_option("--predicted", ev_predicted, "Output of `label` holding gold and predicted labels")
      ->check(CLI::ExistingFile);
  ev->add_option("--json", ev_json, "Metrics JSON path");
  ev->add_option("--csv", ev_csv, "Metrics CSV path");

  // sweep
  auto* sw = app.add_subcommand("sweep", "Accuracy against labeled-data size, random vs pre-trained init");
  std::string sw_pre, sw_data, sw_test, sw_out;
  std::vector<Real> sw_fractions{0.25, 0.5, 1.0};
  std::size_t sw_seeds = 5;
  FinetuneOptions sw_opt;
  sw->add_option("--pretrained", sw_pre, "Pre-training checkpoint")->required()->check(CLI::ExistingFile);
  sw->add_option("--data", sw_data, "Labeled training JSONL")->required()->check(CLI::ExistingFile);
  sw->add_option("--test", sw_test, "Labeled test JSONL")->required()->check(CLI::ExistingFile);
  sw->add_option("--fractions", sw_fractions, "Fractions of the labeled data")->delimiter(',')->capture_default_str();
  sw->add_option("--seeds", sw_seeds, "Seeds per fraction")->capture_default_str();
  sw->add_option("--out", sw_out, "Sweep CSV path");
  add_train_flags(sw, sw_opt.train);

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient check of a whole model");
  std::string gc_model = "lccrl";
  GradCheckOptions gc_opt;
  gc->add_option("--model", gc_model, "lccrl or labeler")->capture_default_str();
  gc->add_option("--epsilon", gc_opt.epsilon, "Finite-difference step")->capture_default_str();
  gc->add_option("--samples", gc_opt.samples_per_param, "Coordinates per parameter tensor")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (gen->parsed()) {
      SyntheticSpec spec;
      if (!gen_spec_file.empty()) spec = load_synthetic_spec(gen_spec_file);
      else if (gen_spec == "default") spec = default_synthetic_spec();
      else if (gen_spec == "speaker-cue") spec = speaker_cue_synthetic_spec();
      else throw ValidationError("unknown spec '" + gen_spec + "'");
      Corpus corpus = generate_synthetic(spec, gen_num, seed);
      if (gen_unlabeled) corpus = strip_labels(std::move(corpus));
      write_with(gen_out, [&](std::ostream& os) { write_jsonl(os, corpus); });
      err << "wrote " << corpus.size() << " conversations to " << gen_out << '\n';
      return 0;
    }

    if (pre->parsed()) {
      const Corpus corpus = read_corpora(pre_data);
      Corpus for_vocab = corpus;
      Corpus extra = read_corpora(pre_vocab_data);
      for_vocab.insert(for_vocab.end(), extra.begin(), extra.end());
      const Vocabulary vocab = Vocabulary::build(for_vocab, pre_min_count);
      pre_cfg.seed = seed;
      TrainResult result;
      auto model = pretrain(pre_dims.resolve(), vocab, vocab.index(corpus), pre_cfg, seed, &result, &err,
                            [&](LcCrlModel& m) {
                              if (!pre_vectors.empty()) {
                                apply_vectors(pre_vectors, pre_freeze_vectors, vocab, m.params, m.encoder.words, err);
                              }
                            });
      model.checkpoint().save(pre_out);
      if (!pre_curve.empty()) write_with(pre_curve, [&](std::ostream& os) { write_loss_curve(os, result.curve); });
      out << "best epoch " << result.best_epoch << " selection loss " << result.best_selection_loss << '\n';
      return 0;
    }

    if (fin->parsed()) {
      const Corpus corpus = read_corpora(fin_data);
      const LabelSet labels = fin_labels.empty() ? labels_of(corpus) : LabelSet(fin_labels);
      std::optional<Checkpoint> init;
      if (!fin_init.empty()) init = Checkpoint::load(fin_init);
      if (init && init->metadata.value("model", std::string()) != "lccrl") {
        throw ValidationError(fin_init + " is not a pre-training checkpoint");
      }
      Vocabulary vocab;
      ModelDims dims;
      if (init && !fin_rebuild) {
        vocab = Vocabulary::from_json(init->metadata.at("vocab"));
        dims = ModelDims::from_json(init->metadata.at("dims"));
      } else {
        Corpus for_vocab = corpus;
        Corpus extra = read_corpora(fin_vocab_data);
        for_vocab.insert(for_vocab.end(), extra.begin(), extra.end());
        vocab = Vocabulary::build(for_vocab, fin_min_count);
        dims = init ? ModelDims::from_json(init->metadata.at("dims")) : fin_dims.resolve();
      }
      fin_opt.speaker_blind = fin_blind;
      fin_opt.freeze_shared = fin_freeze;
      fin_opt.allow_vocab_mismatch = fin_allow;
      fin_opt.init_seed = seed;
      fin_opt.train.seed = seed;
      if (!fin_vectors.empty()) {
        fin_opt.customize = [&](Labeler& m) {
          apply_vectors(fin_vectors, fin_freeze_vectors, vocab, m.params, m.encoder.words, err);
        };
      }
      FinetuneResult result;
      Labeler model = finetune(dims, vocab, labels, vocab.index(corpus, &labels), fin_opt, init ? &*init : nullptr,
                               &result, &err);
      model.checkpoint().save(fin_out);
      if (!fin_curve.empty()) {
        write_with(fin_curve, [&](std::ostream& os) { write_loss_curve(os, result.training.curve); });
      }
      if (result.transfer) {
        const auto shared = shared_parameter_names(model.params);
        const std::string ck_hash = hex64(init->hash(result.transfer->loaded));
        const std::string step0_hash = hex64(*result.initial_shared_hash);
        out << "transfer: " << result.transfer->loaded.size() << " loaded, " << result.transfer->ignored.size()
            << " ignored, " << result.transfer->missing.size() << " missing\n";
        if (!fin_report.empty()) {
          nlohmann::json j{{"loaded", result.transfer->loaded},
                           {"ignored", result.transfer->ignored},
                           {"missing", result.transfer->missing},
                           {"shared_parameters", shared},
                           {"checkpoint_shared_hash", ck_hash},
                           {"step0_shared_hash", step0_hash}};
          write_file(fin_report, j.dump(2) + "\n");
        }
      }
      out << "best epoch " << result.training.best_epoch << " selection loss "
          << result.training.best_selection_loss << '\n';
      return 0;
    }

    if (lab->parsed()) {
      const Labeler model = Labeler::from_checkpoint(Checkpoint::load(lab_model));
      const Corpus corpus = parse_jsonl(lab_data);
      std::ostringstream os;
      for (const auto& c : corpus) {
        nlohmann::json j = to_json(c);
        j["predicted"] = model.label_names(model.vocab.index(c));
        os << j.dump() << '\n';
      }
      if (lab_out.empty()) out << os.str();
      else write_file(lab_out, os.str());
      return 0;
    }

    if (ev->parsed()) {
      std::vector<std::vector<std::size_t>> pred, gold;
      LabelSet labels;
      if (!ev_predicted.empty() == !ev_model.empty()) {
        throw ValidationError("eval needs exactly one of --model or --predicted");
      }
      if (!ev_model.empty()) {
        if (ev_data.empty()) throw ValidationError("eval --model needs --data");
        const Labeler model = Labeler::from_checkpoint(Checkpoint::load(ev_model));
        labels = model.labels;
        for (const auto& c : parse_jsonl(ev_data)) {
          const auto ic = model.vocab.index(c, &labels);
          if (ic.labels.empty()) throw ValidationError("conversation '" + c.id + "' has no gold labels");
          pred.push_back(model.label(ic));
          gold.push_back(ic.labels);
        }
      } else {
        std::ifstream in(ev_predicted);
        std::string line;
        std::size_t line_no = 0;
        std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> rows;
        std::set<std::string> names;
        while (std::getline(in, line)) {
          ++line_no;
          if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
          const std::string where = ev_predicted + ":" + std::to_string(line_no);
          nlohmann::json j;
          try {
            j = nlohmann::json::parse(line);
          } catch (const nlohmann::json::exception& e) {
            throw ValidationError(where + ": " + e.what());
          }
          if (!j.contains("labels") || !j.contains("predicted")) {
            throw ValidationError(where + ": needs both \"labels\" and \"predicted\"");
          }
          rows.emplace_back(j["labels"].get<std::vector<std::string>>(),
                            j["predicted"].get<std::vector<std::string>>());
          names.insert(rows.back().first.begin(), rows.back().first.end());
          names.insert(rows.back().second.begin(), rows.back().second.end());
        }
        labels = label_set_for(names);
        for (const auto& [g, p] : rows) {
          std::vector<std::size_t> gi, pi;
          for (const auto& n : g) gi.push_back(labels.index(n));
          for (const auto& n : p) pi.push_back(labels.index(n));
          gold.push_back(std::move(gi));
          pred.push_back(std::move(pi));
        }
      }
      const MetricsReport report = evaluate(pred, gold, labels);
      if (!ev_json.empty()) write_file(ev_json, to_json(report).dump(2) + "\n");
      if (!ev_csv.empty()) write_with(ev_csv, [&](std::ostream& os) { write_metrics_csv(os, report); });
      out << std::fixed << std::setprecision(2) << "accuracy " << report.accuracy << " macro_f " << report.macro_f
          << " utterances " << report.total << '\n'
          << std::defaultfloat;
      return 0;
    }

    if (sw->parsed()) {
      const Checkpoint ck = Checkpoint::load(sw_pre);
      if (ck.metadata.value("model", std::string()) != "lccrl") {
        throw ValidationError(sw_pre + " is not a pre-training checkpoint");
      }
      const Vocabulary vocab = Vocabulary::from_json(ck.metadata.at("vocab"));
      const ModelDims dims = ModelDims::from_json(ck.metadata.at("dims"));
      const Corpus train = parse_jsonl(sw_data);
      const LabelSet labels = labels_of(train);
      SweepConfig cfg;
      cfg.fractions = sw_fractions;
      cfg.seeds.clear();
      for (std::size_t s = 0; s < sw_seeds; ++s) cfg.seeds.push_back(seed + s);
      cfg.finetune = sw_opt;
      const auto rows = data_size_sweep(dims, vocab, labels, vocab.index(train, &labels),
                                        vocab.index(parse_jsonl(sw_test), &labels), ck, cfg, &err);
      if (!sw_out.empty()) write_with(sw_out, [&](std::ostream& os) { write_sweep_csv(os, rows); });
      out << std::fixed << std::setprecision(2);
      for (const auto& s : summarize(rows)) {
        out << "fraction " << s.fraction << " conversations " << s.num_conversations << " random "
            << s.mean_random_init << " pretrained " << s.mean_pretrained << " gap " << s.gap() << '\n';
      }
      out << std::defaultfloat;
      return 0;
    }

    if (gc->parsed()) {
      GradCheckResult r;
      if (gc_model == "lccrl") r = lccrl_gradient_check(seed, gc_opt);
      else if (gc_model == "labeler") r = labeler_gradient_check(seed, gc_opt);
      else throw ValidationError("unknown model '" + gc_model + "' (expected lccrl or labeler)");
      out << "max relative error " << std::scientific << std::setprecision(3) << r.max_relative_error << " ("
          << r.worst_parameter << "[" << r.worst_index << "], " << r.coordinates_checked << " coordinates)\n"
          << std::defaultfloat;
      return r.max_relative_error <= kGradCheckTolerance ? 0 : 2;
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace lccrl::cli
