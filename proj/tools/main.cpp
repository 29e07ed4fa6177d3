// Command-line front end: tokenization, melody extraction, augmentation,
// training, generation, interpolation and evaluation.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mtae/augment.hpp"
#include "mtae/checkpoint.hpp"
#include "mtae/config_file.hpp"
#include "mtae/error.hpp"
#include "mtae/melody.hpp"
#include "mtae/metrics.hpp"
#include "mtae/perf_codec.hpp"
#include "mtae/sample.hpp"
#include "mtae/synth.hpp"
#include "mtae/token_io.hpp"
#include "mtae/train.hpp"

namespace fs = std::filesystem;
using namespace mtae;

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCategory::io, "cannot write '" + path + "'");
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  if (!out) throw Error(ErrorCategory::io, "failed writing '" + path + "'");
}

TokenSeq crop(TokenSeq t, std::size_t n) {
  if (t.size() > n) t.resize(n);
  return t;
}

/// Expands directories to their *.notes files (sorted).
std::vector<std::string> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<std::string> out;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<std::string> found;
      for (const auto& e : fs::directory_iterator(in)) {
        if (e.path().extension() == ".notes") found.push_back(e.path().string());
      }
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else {
      out.push_back(in);
    }
  }
  if (out.empty()) throw Error(ErrorCategory::io, "no input .notes files");
  return out;
}

TokenSeq melody_tokens(const NoteSequence& seq, std::size_t max_len) {
  TokenSeq t = crop(melody::encode(melody::extract(seq)).tokens, max_len);
  if (t.empty()) t.push_back(melody::kNoEvent);
  return t;
}

std::vector<double> parse_alphas(const std::string& s) {
  if (s.empty()) return default_alpha_grid();
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw Error(ErrorCategory::parse, "bad alpha '" + item + "'");
    }
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> read_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::io, "cannot open pair list '" + path + "'");
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError(n, "expected 'a,b'");
    std::string a = line.substr(0, comma), b = line.substr(comma + 1);
    if (n == 1 && a == "a" && b == "b") continue;  // header
    // Relative paths are taken relative to the list file.
    const fs::path base = fs::path(path).parent_path();
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? p : (base / p).string(); };
    pairs.emplace_back(resolve(a), resolve(b));
  }
  return pairs;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transformer autoencoder for conditional piano performance generation"};
  app.require_subcommand(1);

  // tokenize
  std::string in_path, out_path;
  auto* tok = app.add_subcommand("tokenize", "Notes file -> performance tokens");
  tok->add_option("input", in_path, "notes file")->required();
  tok->add_option("-o,--output", out_path, "token file")->required();

  auto* detok = app.add_subcommand("detokenize", "Performance tokens -> notes file");
  detok->add_option("input", in_path, "token file")->required();
  detok->add_option("-o,--output", out_path, "notes file")->required();

  std::string melody_tokens_path;
  auto* mel = app.add_subcommand("extract-melody", "Viterbi melody of a notes file");
  mel->add_option("input", in_path, "notes file")->required();
  mel->add_option("-o,--output", out_path, "melody notes file")->required();
  mel->add_option("--tokens", melody_tokens_path, "also write the melody token file");

  std::string aug_mode = "perturb";
  std::uint64_t seed = 1;
  auto* aug = app.add_subcommand("augment", "Perturb one file or expand it tenfold");
  aug->add_option("input", in_path, "notes file")->required();
  aug->add_option("-o,--output", out_path, "output file (perturb) or directory (dataset10x)")->required();
  aug->add_option("--mode", aug_mode, "perturb | dataset10x")->check(CLI::IsMember({"perturb", "dataset10x"}));
  aug->add_option("--seed", seed, "random seed");

  std::string config_path, loss_csv, resume_path;
  std::vector<std::string> corpus;
  std::optional<std::size_t> steps_override;
  std::optional<std::uint64_t> seed_override;
  auto* train = app.add_subcommand("train", "Train a model on a corpus of notes files");
  train->add_option("corpus", corpus, "notes files or directories")->required();
  train->add_option("--config", config_path, "key = value config file");
  train->add_option("-o,--output", out_path, "checkpoint path")->required();
  train->add_option("--loss-csv", loss_csv, "write the loss curve (step,nll)");
  train->add_option("--steps", steps_override, "override the configured step count");
  train->add_option("--seed", seed_override, "override the configured seed");
  train->add_option("--resume", resume_path, "continue from a checkpoint");

  std::string gen_mode, ckpt_path, condition_path, melody_path;
  SampleConfig sample_cfg;
  bool write_tokens_out = false;
  auto* gen = app.add_subcommand("generate", "Sample a performance");
  gen->add_option("--mode", gen_mode, "unconditional | performance | melody_performance")
      ->required()
      ->check(CLI::IsMember({"unconditional", "performance", "melody_performance"}));
  gen->add_option("--ckpt", ckpt_path, "checkpoint")->required();
  gen->add_option("--condition", condition_path, "conditioning performance (notes)");
  gen->add_option("--melody", melody_path, "notes file whose melody conditions the sample");
  gen->add_option("--seed", sample_cfg.seed, "random seed");
  gen->add_option("--temperature", sample_cfg.temperature, "softmax temperature (<= 0 greedy)");
  gen->add_option("--top-k", sample_cfg.top_k, "keep the k most likely tokens (0 = all)");
  gen->add_option("--max-len", sample_cfg.max_len, "maximum number of tokens");
  gen->add_option("-o,--output", out_path, "notes file")->required();
  gen->add_flag("--tokens", write_tokens_out, "write tokens instead of notes");

  std::string a_path, b_path, alphas_arg;
  auto* interp = app.add_subcommand("interpolate", "Latent interpolation sweep between two performances");
  interp->add_option("--ckpt", ckpt_path, "checkpoint")->required();
  interp->add_option("--a", a_path, "performance A (notes)")->required();
  interp->add_option("--b", b_path, "performance B (notes)")->required();
  interp->add_option("--melody", melody_path, "fixed melody source (notes)");
  interp->add_option("--alphas", alphas_arg, "comma-separated alphas (default 0,0.125,...,1)");
  interp->add_option("--seed", sample_cfg.seed, "random seed");
  interp->add_option("--temperature", sample_cfg.temperature, "softmax temperature");
  interp->add_option("--top-k", sample_cfg.top_k, "top-k cut");
  interp->add_option("--max-len", sample_cfg.max_len, "maximum number of tokens");
  interp->add_option("-o,--output", out_path, "output directory")->required();

  std::string pairs_path;
  bool with_kl = false, with_mmd = false;
  auto* eval = app.add_subcommand("evaluate", "Pairwise OA similarity table");
  eval->add_option("--pairs", pairs_path, "CSV of 'a,b' notes file pairs")->required();
  eval->add_option("-o,--output", out_path, "CSV output (default stdout)");
  eval->add_flag("--kl", with_kl, "add the averaged symmetric KL column");
  eval->add_flag("--mmd", with_mmd, "add the IMQ kernel similarity column");

  std::size_t per_style = 16, target_tokens = 128;
  auto* syn = app.add_subcommand("synth-corpus", "Write the four-style synthetic corpus");
  syn->add_option("--per-style", per_style, "pieces per style");
  syn->add_option("--tokens", target_tokens, "approximate tokens per piece");
  syn->add_option("--seed", seed, "random seed");
  syn->add_option("-o,--output", out_path, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*tok) {
      write_tokens_file(out_path, perf::encode(read_notes_file(in_path)));
    } else if (*detok) {
      const auto r = perf::decode(read_tokens_file(in_path));
      if (r.dangling_closed || r.orphan_offs || r.invalid_tokens) {
        std::cerr << "repaired: dangling=" << r.dangling_closed << " orphan_offs=" << r.orphan_offs
                  << " invalid=" << r.invalid_tokens << "\n";
      }
      write_notes_file(out_path, r.sequence);
    } else if (*mel) {
      const NoteSequence m = melody::extract(read_notes_file(in_path));
      write_notes_file(out_path, m);
      if (!melody_tokens_path.empty()) {
        const auto enc = melody::encode(m);
        if (enc.clamped) std::cerr << "clamped " << enc.clamped << " melody pitches into 21..110\n";
        write_tokens_file(melody_tokens_path, enc.tokens);
      }
    } else if (*aug) {
      const NoteSequence seq = read_notes_file(in_path);
      if (aug_mode == "perturb") {
        const auto p = augment::sample_perturbation(seed);
        std::cerr << "shift=" << p.semitones << " stretch=" << p.stretch << "\n";
        write_notes_file(out_path, augment::apply(seq, p));
      } else {
        fs::create_directories(out_path);
        const auto all = augment::augment_dataset({seq}, seed);
        const std::string stem = fs::path(in_path).stem().string();
        for (std::size_t i = 0; i < all.size(); ++i) {
          write_notes_file((fs::path(out_path) / (stem + "_" + std::to_string(i) + ".notes")).string(), all[i]);
        }
      }
    } else if (*train) {
      RunConfig cfg = config_path.empty() ? RunConfig{} : read_config_file(config_path);
      if (steps_override) cfg.train.steps = *steps_override;
      if (seed_override) cfg.train.seed = *seed_override;
      const bool with_melody = cfg.model.conditioning == Conditioning::melody_performance;
      std::vector<Example> examples;
      for (const auto& f : expand_inputs(corpus)) {
        examples.push_back(make_example(read_notes_file(f), cfg.model.max_len, with_melody));
      }
      Trainer trainer(cfg.model, cfg.train, std::move(examples));
      if (!resume_path.empty()) restore(trainer, load_checkpoint(resume_path));
      trainer.run();
      save_checkpoint(out_path, snapshot(trainer));
      if (!loss_csv.empty()) {
        auto out = open_out(loss_csv);
        out << "step,nll\n";
        for (const auto& p : trainer.curve()) out << p.step << "," << fmt(p.nll) << "\n";
      }
    } else if (*gen) {
      const TransformerAutoencoder model = load_model(load_checkpoint(ckpt_path));
      const auto& mc = model.config();
      const Conditioning want = parse_conditioning(gen_mode);
      if (mc.conditioning != want) {
        throw Error(ErrorCategory::config, "checkpoint was trained for '" + to_string(mc.conditioning) +
                                               "' but --mode is '" + gen_mode + "'");
      }
      if (want == Conditioning::performance && condition_path.empty()) {
        throw Error(ErrorCategory::config, "--mode performance needs --condition");
      }
      if (want == Conditioning::melody_performance && melody_path.empty()) {
        throw Error(ErrorCategory::config, "--mode melody_performance needs --melody");
      }
      std::optional<TokenSeq> perf_tokens, mel_tokens;
      if (!condition_path.empty() && want != Conditioning::none) {
        perf_tokens = crop(perf::encode(read_notes_file(condition_path)), mc.max_len);
      }
      if (!melody_path.empty() && want == Conditioning::melody_performance) {
        mel_tokens = melody_tokens(read_notes_file(melody_path), mc.max_len);
      }
      const auto memory = conditioning_memory(model, perf_tokens ? &*perf_tokens : nullptr,
                                              mel_tokens ? &*mel_tokens : nullptr);
      const TokenSeq out = sample(model, memory ? &*memory : nullptr, sample_cfg);
      if (write_tokens_out) {
        write_tokens_file(out_path, out);
      } else {
        write_notes_file(out_path, perf::decode(out).sequence);
      }
    } else if (*interp) {
      const TransformerAutoencoder model = load_model(load_checkpoint(ckpt_path));
      const auto& mc = model.config();
      const TokenSeq ta = crop(perf::encode(read_notes_file(a_path)), mc.max_len);
      const TokenSeq tb = crop(perf::encode(read_notes_file(b_path)), mc.max_len);
      std::optional<TokenSeq> mt;
      if (!melody_path.empty()) mt = melody_tokens(read_notes_file(melody_path), mc.max_len);
      const auto sweep = interpolation_sweep(model, ta, tb, parse_alphas(alphas_arg), mt ? &*mt : nullptr, sample_cfg);
      fs::create_directories(out_path);
      auto csv = open_out((fs::path(out_path) / "sweep.csv").string());
      csv << "alpha,oa_a,oa_b,rel_distance,indeterminate,file\n";
      for (std::size_t i = 0; i < sweep.size(); ++i) {
        const std::string name = "sample_" + std::to_string(i) + ".notes";
        write_notes_file((fs::path(out_path) / name).string(), sweep[i].notes);
        csv << fmt(sweep[i].alpha) << "," << fmt(sweep[i].oa_a) << "," << fmt(sweep[i].oa_b) << ","
            << fmt(sweep[i].rel.value) << "," << (sweep[i].rel.indeterminate ? 1 : 0) << "," << name << "\n";
      }
    } else if (*eval) {
      std::ostringstream table;
      table << "a,b";
      for (auto f : metrics::kFeatures) table << "," << metrics::to_string(f);
      table << ",avg";
      if (with_kl) table << ",kl";
      if (with_mmd) table << ",imq";
      table << "\n";
      for (const auto& [a, b] : read_pairs(pairs_path)) {
        const NoteSequence sa = read_notes_file(a), sb = read_notes_file(b);
        const auto fa = metrics::compute_features(sa), fb = metrics::compute_features(sb);
        const auto r = metrics::oa_similarity(fa, fb);
        table << a << "," << b;
        for (double v : r.oa) table << "," << fmt(v);
        table << "," << fmt(r.average);
        if (with_kl) table << "," << fmt(metrics::averaged_kl(fa, fb));
        if (with_mmd) table << "," << fmt(metrics::imq_kernel(metrics::summary_vector(sa), metrics::summary_vector(sb)));
        table << "\n";
      }
      if (out_path.empty()) {
        std::cout << table.str();
      } else {
        write_text(out_path, table.str());
      }
    } else if (*syn) {
      fs::create_directories(out_path);
      for (const auto& p : synth::corpus(per_style, seed, target_tokens)) {
        static std::size_t counter = 0;
        const std::string name = "style" + std::to_string(p.style) + "_" + std::to_string(counter++ / synth::kStyles) + ".notes";
        write_notes_file((fs::path(out_path) / name).string(), p.notes);
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << category_name(e.category()) << ": " << e.what() << "\n";
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: io: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
