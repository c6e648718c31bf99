#include "gamenet/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace gamenet {
namespace {

struct Cluster {
  std::vector<int> diagnoses;
  std::vector<int> procedures;
  std::vector<int> medications;
};

std::vector<int> sample_distinct(int population, int count, std::mt19937_64& rng) {
  std::vector<int> all(static_cast<std::size_t>(population));
  std::iota(all.begin(), all.end(), 0);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(static_cast<std::size_t>(count));
  std::sort(all.begin(), all.end());
  return all;
}

void draw_subset(const std::vector<int>& pool, double rate, std::mt19937_64& rng, std::vector<int>& out) {
  std::bernoulli_distribution keep(rate);
  for (int c : pool) {
    if (keep(rng)) out.push_back(c);
  }
}

void draw_noise(int population, double mean, std::mt19937_64& rng, std::vector<int>& out) {
  if (mean <= 0) return;
  std::poisson_distribution<int> count(mean);
  std::uniform_int_distribution<int> code(0, population - 1);
  for (int n = count(rng); n > 0; --n) out.push_back(code(rng));
}

std::string make_code(char prefix, int index, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%c%0*d", prefix, width, index);
  return buf;
}

}  // namespace

void SyntheticConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("synthetic config: " + what); };
  if (num_patients <= 0) fail("num_patients must be positive");
  if (num_diagnoses <= 0 || num_procedures <= 0 || num_medications <= 0) fail("vocabulary sizes must be positive");
  if (num_clusters < 2) fail("need at least two condition clusters");
  if (max_visits < 2) fail("max_visits must be at least 2");
  if (extra_visit_rate < 0) fail("extra_visit_rate must be non-negative");
  if (diagnoses_per_cluster <= 0 || diagnoses_per_cluster > num_diagnoses)
    fail("diagnoses_per_cluster exceeds vocabulary");
  if (procedures_per_cluster <= 0 || procedures_per_cluster > num_procedures)
    fail("procedures_per_cluster exceeds vocabulary");
  if (medications_per_cluster < 2 || medications_per_cluster > ddi_medications) {
    fail("medications_per_cluster must lie in [2, ddi_medications]");
  }
  if (ddi_medications < 2 || ddi_medications > num_medications) fail("ddi_medications exceeds vocabulary");
  const long long max_pairs = static_cast<long long>(ddi_medications) * (ddi_medications - 1) / 2;
  if (ddi_pairs < 0 || ddi_pairs > max_pairs) fail("ddi_pairs exceeds the number of distinct medication pairs");
  for (double r : {acute_diagnosis_rate, chronic_first_diagnosis_rate, chronic_followup_diagnosis_rate,
                   acute_procedure_rate, chronic_procedure_rate, prescription_rate, acute_persistence}) {
    if (r < 0 || r > 1) fail("rates must lie in [0, 1]");
  }
  if (noise_diagnoses < 0 || noise_procedures < 0 || noise_medications < 0) fail("noise means must be non-negative");
}

SyntheticCohort generate_synthetic_cohort(const SyntheticConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);

  SyntheticCohort cohort;
  for (int i = 0; i < config.num_diagnoses; ++i) cohort.vocab.diagnosis.add(make_code('D', i, 4));
  for (int i = 0; i < config.num_procedures; ++i) cohort.vocab.procedure.add(make_code('P', i, 4));
  for (int i = 0; i < config.num_medications; ++i) cohort.vocab.medication.add(make_code('M', i, 3));

  // Cluster medications come from the interaction-covered range [0, ddi_medications).
  std::vector<Cluster> clusters(static_cast<std::size_t>(config.num_clusters));
  for (auto& c : clusters) {
    c.diagnoses = sample_distinct(config.num_diagnoses, config.diagnoses_per_cluster, rng);
    c.procedures = sample_distinct(config.num_procedures, config.procedures_per_cluster, rng);
    c.medications = sample_distinct(config.ddi_medications, config.medications_per_cluster, rng);
  }

  // One interacting pair inside every cluster's prescription set, a second
  // one for half of them, the rest spread uniformly.
  std::set<std::pair<int, int>> ddi;
  auto plant = [&](int a, int b) {
    if (a == b || static_cast<int>(ddi.size()) >= config.ddi_pairs) return;
    ddi.emplace(std::min(a, b), std::max(a, b));
  };
  std::bernoulli_distribution second_pair(0.5);
  for (const auto& c : clusters) {
    const auto pick = sample_distinct(static_cast<int>(c.medications.size()), 2, rng);
    plant(c.medications[pick[0]], c.medications[pick[1]]);
    if (second_pair(rng)) {
      const auto pick2 = sample_distinct(static_cast<int>(c.medications.size()), 2, rng);
      plant(c.medications[pick2[0]], c.medications[pick2[1]]);
    }
  }
  std::uniform_int_distribution<int> any_med(0, config.ddi_medications - 1);
  while (static_cast<int>(ddi.size()) < config.ddi_pairs) plant(any_med(rng), any_med(rng));
  for (const auto& [a, b] : ddi) {
    cohort.ddi_pairs.emplace_back(cohort.vocab.medication.code(a), cohort.vocab.medication.code(b));
  }

  std::poisson_distribution<int> extra_visits(config.extra_visit_rate);
  std::uniform_int_distribution<int> any_cluster(0, config.num_clusters - 1);
  std::bernoulli_distribution persist(config.acute_persistence);
  for (int p = 0; p < config.num_patients; ++p) {
    PatientRecord record;
    record.patient_id = make_code('P', p, 6);
    const int n_visits = std::min(config.max_visits, 2 + extra_visits(rng));
    const int chronic = any_cluster(rng);
    int acute = -1;
    for (int t = 0; t < n_visits; ++t) {
      if (acute < 0 || !persist(rng)) {
        do {
          acute = any_cluster(rng);
        } while (acute == chronic);
      }
      const auto& ch = clusters[static_cast<std::size_t>(chronic)];
      const auto& ac = clusters[static_cast<std::size_t>(acute)];

      std::vector<int> dx, px, rx;
      draw_subset(ac.diagnoses, config.acute_diagnosis_rate, rng, dx);
      draw_subset(ch.diagnoses, t == 0 ? config.chronic_first_diagnosis_rate : config.chronic_followup_diagnosis_rate,
                  rng, dx);
      draw_noise(config.num_diagnoses, config.noise_diagnoses, rng, dx);

      draw_subset(ac.procedures, config.acute_procedure_rate, rng, px);
      draw_subset(ch.procedures, config.chronic_procedure_rate, rng, px);
      draw_noise(config.num_procedures, config.noise_procedures, rng, px);

      draw_subset(ac.medications, config.prescription_rate, rng, rx);
      draw_subset(ch.medications, config.prescription_rate, rng, rx);
      draw_noise(config.num_medications, config.noise_medications, rng, rx);
      if (rx.empty()) rx.push_back(ac.medications.front());

      record.visits.push_back(
          Visit{make_code_set(std::move(dx)), make_code_set(std::move(px)), make_code_set(std::move(rx))});
    }
    cohort.records.push_back(std::move(record));
  }
  return cohort;
}

void write_cohort(const std::filesystem::path& dir, const SyntheticCohort& cohort) {
  std::filesystem::create_directories(dir);
  cohort.vocab.save(dir / "vocab");
  save_records(dir / "records.jsonl", cohort.records, cohort.vocab);
  write_ddi_pairs(dir / "ddi.tsv", cohort.ddi_pairs);
}

CohortStatistics cohort_statistics(std::span<const PatientRecord> records, const Vocabularies& vocab,
                                   std::span<const CodePair> ddi_pairs) {
  CohortStatistics s;
  s.patients = records.size();
  s.diagnoses = vocab.diagnosis.size();
  s.procedures = vocab.procedure.size();
  s.medications = vocab.medication.size();
  std::size_t dx = 0, px = 0, rx = 0;
  for (const auto& r : records) {
    s.visits += r.visits.size();
    for (const auto& v : r.visits) {
      dx += v.diagnoses.size();
      px += v.procedures.size();
      rx += v.medications.size();
    }
  }
  if (s.patients > 0) s.avg_visits = static_cast<double>(s.visits) / static_cast<double>(s.patients);
  if (s.visits > 0) {
    s.avg_diagnoses = static_cast<double>(dx) / static_cast<double>(s.visits);
    s.avg_procedures = static_cast<double>(px) / static_cast<double>(s.visits);
    s.avg_medications = static_cast<double>(rx) / static_cast<double>(s.visits);
  }
  std::set<std::string> covered;
  for (const auto& [a, b] : ddi_pairs) {
    if (vocab.medication.find(a)) covered.insert(a);
    if (vocab.medication.find(b)) covered.insert(b);
  }
  s.ddi_medications = static_cast<int>(covered.size());
  s.ddi_pairs = ddi_pairs.size();
  return s;
}

std::string format_statistics(const CohortStatistics& s) {
  std::ostringstream out;
  char buf[128];
  auto row = [&](const char* label, const std::string& value) {
    std::snprintf(buf, sizeof(buf), "%-38s %10s\n", label, value.c_str());
    out << buf;
  };
  auto fixed = [](double v) {
    char b[32];
    std::snprintf(b, sizeof(b), "%.2f", v);
    return std::string(b);
  };
  row("# patients", std::to_string(s.patients));
  row("# clinical events", std::to_string(s.visits));
  row("# diagnosis", std::to_string(s.diagnoses));
  row("# procedure", std::to_string(s.procedures));
  row("# medication", std::to_string(s.medications));
  out << std::string(49, '-') << '\n';
  row("avg # of visits", fixed(s.avg_visits));
  row("avg # of diagnosis", fixed(s.avg_diagnoses));
  row("avg # of procedure", fixed(s.avg_procedures));
  row("avg # of medication", fixed(s.avg_medications));
  out << std::string(49, '-') << '\n';
  row("# medication in DDI knowledge base", std::to_string(s.ddi_medications));
  row("# DDI pairs in knowledge base", std::to_string(s.ddi_pairs));
  return out.str();
}

}  // namespace gamenet
