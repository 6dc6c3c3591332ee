#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "criteria.hpp"
#include "headline_forge/checkpoint.hpp"
#include "headline_forge/error.hpp"
#include "headline_forge/experiment.hpp"
#include "headline_forge/rng.hpp"
#include "headline_forge/scoring.hpp"
#include "headline_forge/service.hpp"
#include "headline_forge/synth.hpp"
#include "headline_forge/train.hpp"

// after Eigen: resolv.h defines _res
#include <httplib.h>

namespace hf::acceptance {
namespace {

using nlohmann::json;

struct TrainedWorld {
  SyntheticWorld world;
  PreparedData data;
};

TrainedWorld& small_world() {
  static TrainedWorld tw = [] {
    TrainedWorld t{generate_synthetic(200, 200, 21), {}};
    ExperimentConfig config;
    config.seed = 21;
    t.data = prepare_data(join_labels(t.world.corpus, label_synthetic(t.world, NoiseFilter{}, 99.0)), config);
    return t;
  }();
  return tw;
}

std::shared_ptr<TrainedModel> train_briefly(Architecture arch) {
  TrainedWorld& tw = small_world();
  auto model = std::make_shared<Model>(arch, hyperparameters_for(*tw.data.features), 21);
  TrainConfig tc;
  tc.epochs = 2;
  train(*model, tw.data.train, tw.data.validation, tc);
  auto t = std::make_shared<TrainedModel>();
  t->model = model;
  // the pipeline outlives every TrainedModel built here
  t->features = std::shared_ptr<const FeaturePipeline>(tw.data.features.get(), [](const FeaturePipeline*) {});
  t->info = {{"seed", 21}, {"epochs", 2}};
  return t;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// Unseen articles plus junk text, so scoring exercises unknown tokens too.
std::vector<Document> random_documents(std::size_t n) {
  SyntheticWorld other = generate_synthetic(std::max<std::size_t>(n, 10), 1, 1234);
  Rng rng(derive_seed(5, "acceptance.docs"));
  std::vector<Document> docs(other.corpus.begin(), other.corpus.begin() + static_cast<long>(n));
  for (std::size_t i = 0; i < n; i += 3) docs[i].headline += " qqzx " + std::to_string(rng.below(1000000));
  return docs;
}

bool is_checkpoint_error(ErrorCode c) {
  return c == ErrorCode::checkpoint_format || c == ErrorCode::checkpoint_version ||
         c == ErrorCode::checkpoint_truncated || c == ErrorCode::checkpoint_shape ||
         c == ErrorCode::checkpoint_corrupt;
}

// ---------------------------------------------------------------------------

Outcome checkpoint() {
  const auto dir = std::filesystem::temp_directory_path() / "hf_acceptance_ckpt";
  std::filesystem::create_directories(dir);
  const std::vector<Document> docs = random_documents(10);
  std::size_t identical = 0, architectures = 0;
  bool narrow_head = false;
  std::string reference_bytes;
  std::ostringstream problems;

  for (Architecture arch : kAllArchitectures) {
    ++architectures;
    auto trained = train_briefly(arch);
    const auto path = dir / (std::string(to_string(arch)) + ".ckpt");
    save_checkpoint(*trained, path);
    const TrainedModel loaded = load_checkpoint(path);
    bool same = loaded.model->architecture() == arch;
    for (const Document& d : docs) {
      const ModelInput a = trained->features->featurize(d), b = loaded.features->featurize(d);
      const ModelInput* pa[] = {&a};
      const ModelInput* pb[] = {&b};
      if (!(trained->model->predict(pa) == loaded.model->predict(pb))) same = false;
      const std::vector<std::string> cands = {d.headline};
      if (score(*trained, d.body, cands).scores[0].p != score(loaded, d.body, cands).scores[0].p) same = false;
    }
    if (same) ++identical;
    else problems << "; " << to_string(arch) << " scores differ after reload";
    if (arch == Architecture::proposed_no_similarity) {
      const Hyperparameters& hp = loaded.model->hyperparameters();
      for (auto& [name, t] : std::as_const(*loaded.model).state())
        if (name == "head.dense1.weight" && t->dim(0) == 300 && hp.head_input(arch) == 300) narrow_head = true;
    }
    if (arch == Architecture::proposed) reference_bytes = read_file(path);
  }

  // Every damaged variant must raise a typed checkpoint error.
  std::size_t attempts = 0, typed = 0;
  auto attempt = [&](const std::string& bytes, const char* what) {
    ++attempts;
    try {
      (void)parse_checkpoint(bytes);
      problems << "; " << what << " accepted";
    } catch (const Error& e) {
      if (is_checkpoint_error(e.code())) ++typed;
      else problems << "; " << what << " raised " << to_string(e.code());
    } catch (const std::exception& e) {
      problems << "; " << what << " raised untyped " << e.what();
    }
  };
  std::string bad = reference_bytes;
  bad[1] = 'Z';
  attempt(bad, "bad magic");
  bad = reference_bytes;
  bad[8] = static_cast<char>(kCheckpointVersion + 1);
  attempt(bad, "future version");
  for (std::size_t k = 0; k < 64; ++k) attempt(reference_bytes.substr(0, reference_bytes.size() * k / 64), "truncation");
  Rng rng(derive_seed(9, "acceptance.flips"));
  for (int k = 0; k < 64; ++k) {
    bad = reference_bytes;
    bad[rng.below(bad.size())] ^= static_cast<char>(1 + rng.below(255));
    attempt(bad, "byte flip");
  }
  attempt(reference_bytes + std::string(5, '\0'), "trailing bytes");
  {
    // internally consistent file whose metadata disagrees with its tensors
    bad = reference_bytes;
    const std::size_t at = bad.find("\"embed_dim\":100");
    if (at != std::string::npos) {
      bad.replace(at, 15, "\"embed_dim\":101");
      const std::uint64_t sum = fnv1a64(std::string_view(bad).substr(0, bad.size() - 8));
      for (int k = 0; k < 8; ++k) bad[bad.size() - 8 + k] = static_cast<char>((sum >> (8 * k)) & 0xff);
      try {
        (void)parse_checkpoint(bad);
        problems << "; shape-mismatched metadata accepted";
      } catch (const Error& e) {
        ++attempts;
        if (e.code() == ErrorCode::checkpoint_shape) ++typed;
        else problems << "; shape mismatch raised " << to_string(e.code());
      }
    } else {
      problems << "; embed_dim not found in metadata";
    }
  }
  std::filesystem::remove_all(dir);

  std::ostringstream msg;
  msg << identical << "/" << architectures << " architectures bit-identical on 10 unseen documents after reload; "
      << "no-similarity head 300 wide: " << (narrow_head ? "yes" : "no") << "; " << typed << "/" << attempts
      << " damaged files rejected with typed errors" << problems.str();
  return {identical == architectures && narrow_head && typed == attempts && attempts > 100, msg.str()};
}

// ---------------------------------------------------------------------------

bool valid_score_entry(const json& s) {
  if (!s.is_object() || !s.contains("headline") || !s["headline"].is_string()) return false;
  if (!s.contains("p") || !s["p"].is_array() || s["p"].size() != 4) return false;
  double total = 0;
  for (const auto& v : s["p"]) {
    if (!v.is_number() || v.get<double>() < 0) return false;
    total += v.get<double>();
  }
  if (std::abs(total - 1.0) > 1e-9) return false;
  if (!s.contains("label") || !s["label"].is_number_integer()) return false;
  const int label = s["label"].get<int>();
  return label >= 1 && label <= 4 && s.contains("rank") && s["rank"].is_number_integer();
}

bool valid_error(const httplib::Result& r, int status) {
  if (!r || r->status != status) return false;
  const json e = json::parse(r->body, nullptr, false);
  return e.is_object() && e.contains("error") && e["error"].is_object() && e["error"]["code"].is_string() &&
         e["error"]["message"].is_string();
}

Outcome service() {
  const auto dir = std::filesystem::temp_directory_path() / "hf_acceptance_service";
  std::filesystem::create_directories(dir);
  const auto path = dir / "model.ckpt";
  save_checkpoint(*train_briefly(Architecture::proposed), path);
  const std::string before = read_file(path);
  auto model = std::make_shared<const TrainedModel>(load_checkpoint(path));

  ServiceConfig cfg;
  cfg.port = 0;
  cfg.threads = 8;
  cfg.max_body_bytes = 64 * 1024;
  ScoringService svc(model, cfg);
  svc.start();
  std::ostringstream problems;
  std::size_t contract_checks = 0, contract_ok = 0;
  auto expect = [&](bool ok, const char* what) {
    ++contract_checks;
    if (ok) ++contract_ok;
    else problems << "; " << what;
  };

  httplib::Client cli("127.0.0.1", svc.port());
  auto health = cli.Get("/v1/health");
  expect(health && health->status == 200 &&
             json::parse(health->body, nullptr, false) == json{{"status", "ok"}, {"model", "proposed"}},
         "health schema");
  auto info = cli.Get("/v1/model");
  const json m = info ? json::parse(info->body, nullptr, false) : json();
  expect(info && info->status == 200 && m.is_object() && m["architecture"] == "proposed" &&
             m["version"] == kCheckpointVersion && m["dims"].is_object() && m["dims"]["head_input"] == 400,
         "model schema");

  const TrainedWorld& tw = small_world();
  const std::string body = tw.world.corpus[0].body;
  std::vector<std::string> base;
  for (std::size_t i = 0; i < 8; ++i) base.push_back(tw.world.corpus[i].headline);
  const json base_req = {{"body", body}, {"candidates", base}};
  auto reference = cli.Post("/v1/score", base_req.dump(), "application/json");
  std::map<std::string, json> expected_p;
  bool reference_ok = reference && reference->status == 200;
  if (reference_ok) {
    const json r = json::parse(reference->body);
    reference_ok = r["scores"].size() == base.size();
    std::set<int> ranks;
    for (const auto& s : r["scores"]) {
      reference_ok = reference_ok && valid_score_entry(s);
      expected_p[s["headline"].get<std::string>()] = s["p"];
      ranks.insert(s["rank"].get<int>());
    }
    reference_ok = reference_ok && ranks.size() == base.size() && *ranks.begin() == 1 &&
                   *ranks.rbegin() == static_cast<int>(base.size());
  }
  expect(reference_ok, "score schema");
  const json two = {{"body", body}, {"candidates", {base[0], base[1]}}};
  auto pair = cli.Post("/v1/score", two.dump(), "application/json");
  bool pair_ok = pair && pair->status == 200;
  if (pair_ok) {
    const json r = json::parse(pair->body);
    pair_ok = r["scores"].size() == 2 &&
              std::set<int>{r["scores"][0]["rank"].get<int>(), r["scores"][1]["rank"].get<int>()} ==
                  std::set<int>{1, 2};
  }
  expect(pair_ok, "two-candidate ranks");
  expect(valid_error(cli.Post("/v1/score", std::string(cfg.max_body_bytes + 10, 'x'), "application/json"), 413),
         "oversized body");
  expect(valid_error(cli.Post("/v1/score", "{\"body\": 3}", "application/json"), 400), "bad body field");
  expect(valid_error(cli.Post("/v1/score", json{{"body", body}, {"candidates", {""}}}.dump(), "application/json"),
                     400),
         "empty candidate");
  expect(valid_error(cli.Post("/v1/score", json{{"body", body}, {"candidates", std::vector<std::string>(33, "h")}}
                                               .dump(),
                              "application/json"),
                     400),
         "too many candidates");
  expect(valid_error(cli.Get("/v1/missing"), 404), "unknown route");

  // 16 concurrent clients sending permuted requests with duplicates.
  constexpr int kClients = 16, kRequests = 12;
  std::atomic<int> good{0}, bad{0}, identical{0};
  std::vector<std::thread> clients;
  const std::string fixed_body = reference ? reference->body : "";
  for (int c = 0; c < kClients; ++c) {
    clients.emplace_back([&, c] {
      httplib::Client local("127.0.0.1", svc.port());
      Rng rng(derive_seed(c, "acceptance.client"));
      for (int k = 0; k < kRequests; ++k) {
        std::vector<std::string> cands = base;
        cands.push_back(base[rng.below(base.size())]);
        std::span<std::string> view(cands);
        rng.shuffle(view);
        auto res = local.Post("/v1/score", json{{"body", body}, {"candidates", cands}}.dump(), "application/json");
        bool ok = res && res->status == 200;
        if (ok) {
          const json r = json::parse(res->body, nullptr, false);
          ok = r.is_object() && r["scores"].size() == cands.size();
          std::vector<int> ranks;
          for (std::size_t i = 0; ok && i < cands.size(); ++i) {
            const json& s = r["scores"][i];
            ok = valid_score_entry(s) && s["headline"] == cands[i] && s["p"] == expected_p.at(cands[i]);
            if (ok) ranks.push_back(s["rank"].get<int>());
          }
          if (ok) {
            std::vector<int> sorted = ranks;
            std::sort(sorted.begin(), sorted.end());
            for (std::size_t i = 0; i < sorted.size(); ++i) ok = ok && sorted[i] == static_cast<int>(i + 1);
            // a higher P(indicator 2) never ranks below a lower one
            for (std::size_t i = 0; ok && i < cands.size(); ++i)
              for (std::size_t j = 0; ok && j < cands.size(); ++j)
                if (r["scores"][i]["p"][1].get<double>() > r["scores"][j]["p"][1].get<double>())
                  ok = ranks[i] < ranks[j];
          }
        }
        (ok ? good : bad)++;
        auto same = local.Post("/v1/score", base_req.dump(), "application/json");
        if (same && same->status == 200 && same->body == fixed_body) identical++;
      }
    });
  }
  for (auto& t : clients) t.join();
  svc.stop();
  const bool untouched = read_file(path) == before;
  std::filesystem::remove_all(dir);

  const int total = kClients * kRequests;
  std::ostringstream msg;
  msg << contract_ok << "/" << contract_checks << " endpoint contract checks; " << good << "/" << total
      << " permuted requests with duplicates consistent under " << kClients << " concurrent clients; "
      << identical << "/" << total << " repeated requests byte-identical; checkpoint untouched: "
      << (untouched ? "yes" : "no") << problems.str();
  return {contract_ok == contract_checks && good == total && identical == total && untouched, msg.str()};
}

}  // namespace

std::vector<Criterion> serving_criteria() {
  return {{"checkpoint", checkpoint}, {"service", service}};
}

}  // namespace hf::acceptance
