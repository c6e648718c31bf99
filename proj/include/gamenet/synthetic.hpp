#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gamenet/data.hpp"
#include "gamenet/graphs.hpp"

namespace gamenet {

/// Generator settings for a synthetic cohort. Each latent condition cluster
/// owns a set of diagnoses, procedures and medications. Every patient has one
/// chronic cluster that persists across visits (its diagnoses are mostly
/// recorded at the first visit and only sporadically afterwards) and one acute
/// cluster per visit. Prescriptions follow the active clusters.
///
/// Defaults give roughly 1/10 of the MIMIC-III cohort shape: ~635 patients,
/// ~2.36 visits, ~10.5 diagnoses, ~3.8 procedures and ~8.8 medications per
/// visit.
struct SyntheticConfig {
  int num_diagnoses = 196;
  int num_procedures = 143;
  int num_medications = 145;
  int num_patients = 635;

  double extra_visit_rate = 0.36;  // visits = 2 + Poisson(rate), capped
  int max_visits = 8;

  int num_clusters = 24;
  int diagnoses_per_cluster = 12;
  int procedures_per_cluster = 5;
  int medications_per_cluster = 5;

  double acute_diagnosis_rate = 0.55;
  double chronic_first_diagnosis_rate = 0.35;
  double chronic_followup_diagnosis_rate = 0.1;
  double acute_procedure_rate = 0.6;
  double chronic_procedure_rate = 0.12;
  double prescription_rate = 0.9;
  double acute_persistence = 0.3;  // chance the acute cluster carries over

  double noise_diagnoses = 1.2;  // Poisson means of unrelated codes per visit
  double noise_procedures = 0.3;
  double noise_medications = 0.4;

  int ddi_pairs = 60;
  int ddi_medications = 123;  // medications covered by the interaction list

  void validate() const;
};

struct SyntheticCohort {
  Vocabularies vocab;
  std::vector<PatientRecord> records;
  std::vector<CodePair> ddi_pairs;
};

SyntheticCohort generate_synthetic_cohort(const SyntheticConfig& config, std::uint64_t seed);

/// Writes records.jsonl, vocab/{diagnosis,procedure,medication}.txt, ddi.tsv.
void write_cohort(const std::filesystem::path& dir, const SyntheticCohort& cohort);

struct CohortStatistics {
  std::size_t patients = 0;
  std::size_t visits = 0;
  int diagnoses = 0;
  int procedures = 0;
  int medications = 0;
  double avg_visits = 0;
  double avg_diagnoses = 0;
  double avg_procedures = 0;
  double avg_medications = 0;
  int ddi_medications = 0;
  std::size_t ddi_pairs = 0;
};

CohortStatistics cohort_statistics(std::span<const PatientRecord> records, const Vocabularies& vocab,
                                   std::span<const CodePair> ddi_pairs);

/// Two-column text table in the layout of a dataset statistics summary.
std::string format_statistics(const CohortStatistics& stats);

}  // namespace gamenet
