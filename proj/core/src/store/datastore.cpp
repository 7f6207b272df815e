#include "hg/store/datastore.hpp"

#include "hg/common/error.hpp"
#include "hg/domain/serialize.hpp"

namespace hg::store {
namespace {

constexpr std::string_view kSchema = R"sql(
CREATE TABLE IF NOT EXISTS studies (
  study_id   TEXT PRIMARY KEY,
  name       TEXT NOT NULL UNIQUE,
  salt       BLOB NOT NULL,
  doc        TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS credentials (
  token_hash TEXT PRIMARY KEY,
  study_id   TEXT,
  role       TEXT NOT NULL,
  subject_id TEXT
);
CREATE TABLE IF NOT EXISTS subjects (
  subject_id TEXT PRIMARY KEY,
  study_id   TEXT NOT NULL REFERENCES studies(study_id),
  device_id  TEXT UNIQUE,
  doc        TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS subjects_by_study ON subjects(study_id);
CREATE TABLE IF NOT EXISTS cohorts (
  cohort_id  TEXT PRIMARY KEY,
  study_id   TEXT NOT NULL REFERENCES studies(study_id),
  name       TEXT NOT NULL,
  doc        TEXT NOT NULL,
  UNIQUE (study_id, name)
);
CREATE TABLE IF NOT EXISTS testsets (
  testset_id TEXT PRIMARY KEY,
  study_id   TEXT NOT NULL REFERENCES studies(study_id),
  name       TEXT NOT NULL,
  doc        TEXT NOT NULL,
  UNIQUE (study_id, name)
);
CREATE TABLE IF NOT EXISTS tests (
  test_id    TEXT PRIMARY KEY,
  testset_id TEXT NOT NULL REFERENCES testsets(testset_id),
  study_id   TEXT NOT NULL,
  kind       TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS tasks (
  task_id    TEXT PRIMARY KEY,
  study_id   TEXT NOT NULL REFERENCES studies(study_id),
  testset_id TEXT NOT NULL REFERENCES testsets(testset_id),
  cohort_id  TEXT NOT NULL REFERENCES cohorts(cohort_id),
  doc        TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS occurrences (
  occurrence_id TEXT PRIMARY KEY,
  task_id    TEXT NOT NULL REFERENCES tasks(task_id),
  study_id   TEXT NOT NULL,
  subject_id TEXT NOT NULL REFERENCES subjects(subject_id),
  slot       TEXT NOT NULL,
  due_start  INTEGER NOT NULL,
  due_end    INTEGER NOT NULL,
  status     TEXT NOT NULL,
  UNIQUE (task_id, subject_id, slot)
);
CREATE INDEX IF NOT EXISTS occurrences_by_subject ON occurrences(subject_id, due_start);
CREATE INDEX IF NOT EXISTS occurrences_by_status ON occurrences(status, due_end);
CREATE TABLE IF NOT EXISTS datasets (
  dataset_id TEXT PRIMARY KEY,
  study_id   TEXT NOT NULL,
  testset_id TEXT NOT NULL,
  test_id    TEXT NOT NULL,
  day        INTEGER NOT NULL,
  seq        INTEGER NOT NULL,
  status     TEXT NOT NULL,
  UNIQUE (study_id, test_id, day, seq)
);
CREATE INDEX IF NOT EXISTS datasets_by_status ON datasets(status);
CREATE TABLE IF NOT EXISTS datapoints (
  datapoint_id    TEXT PRIMARY KEY,
  study_id        TEXT NOT NULL,
  subject_id      TEXT NOT NULL,
  occurrence_id   TEXT NOT NULL REFERENCES occurrences(occurrence_id),
  test_id         TEXT NOT NULL,
  idempotency_key TEXT NOT NULL,
  dataset_id      TEXT REFERENCES datasets(dataset_id),
  doc             TEXT NOT NULL,
  UNIQUE (occurrence_id, test_id, idempotency_key)
);
CREATE INDEX IF NOT EXISTS datapoints_by_dataset ON datapoints(dataset_id);
CREATE INDEX IF NOT EXISTS datapoints_by_study ON datapoints(study_id);
CREATE TABLE IF NOT EXISTS results (
  result_id    TEXT PRIMARY KEY,
  study_id     TEXT NOT NULL,
  dataset_id   TEXT,
  datapoint_id TEXT NOT NULL,
  subject_id   TEXT NOT NULL,
  worker_kind  TEXT NOT NULL,
  test_id      TEXT,
  collected_at INTEGER NOT NULL,
  produced_at  INTEGER NOT NULL,
  doc          TEXT NOT NULL,
  UNIQUE (datapoint_id, worker_kind)
);
CREATE INDEX IF NOT EXISTS results_by_subject ON results(study_id, subject_id, produced_at);
CREATE TABLE IF NOT EXISTS rules (
  rule_id  TEXT PRIMARY KEY,
  study_id TEXT NOT NULL REFERENCES studies(study_id),
  name     TEXT NOT NULL,
  active   INTEGER NOT NULL,
  doc      TEXT NOT NULL,
  UNIQUE (study_id, name)
);
CREATE TABLE IF NOT EXISTS rule_runs (
  rule_id      TEXT NOT NULL REFERENCES rules(rule_id),
  day          INTEGER NOT NULL,
  cohort_id    TEXT,
  task_id      TEXT,
  automatic    INTEGER NOT NULL,
  evaluated_at INTEGER NOT NULL,
  PRIMARY KEY (rule_id, day)
);
CREATE TABLE IF NOT EXISTS vault (
  study_id  TEXT NOT NULL,
  raw_id    TEXT NOT NULL,
  pseudonym TEXT NOT NULL,
  PRIMARY KEY (study_id, raw_id),
  UNIQUE (study_id, pseudonym)
);
)sql";

template <typename T>
T load_doc(const Statement& st, int col) {
  return Json::parse(st.text(col)).get<T>();
}

template <typename T>
std::optional<T> one(Statement& st) {
  if (!st.step()) return std::nullopt;
  return load_doc<T>(st, 0);
}

template <typename T>
std::vector<T> all(Statement& st) {
  std::vector<T> out;
  while (st.step()) out.push_back(load_doc<T>(st, 0));
  return out;
}

constexpr std::string_view kOccurrenceColumns =
    "occurrence_id, task_id, study_id, subject_id, slot, due_start, due_end, status";

TaskOccurrence read_occurrence(const Statement& st) {
  TaskOccurrence o;
  o.occurrence_id = st.text(0);
  o.task_id = st.text(1);
  o.study_id = st.text(2);
  o.subject_id = st.text(3);
  o.slot = st.text(4);
  o.due_start = {st.int64(5)};
  o.due_end = {st.int64(6)};
  o.status = occurrence_status_from_string(st.text(7)).value();
  return o;
}

std::vector<TaskOccurrence> all_occurrences(Statement& st) {
  std::vector<TaskOccurrence> out;
  while (st.step()) out.push_back(read_occurrence(st));
  return out;
}

void add_to_tally(OccurrenceTally& t, const std::string& status, std::int64_t n) {
  auto s = occurrence_status_from_string(status);
  if (!s) return;
  switch (*s) {
    case OccurrenceStatus::kPending: t.pending += n; break;
    case OccurrenceStatus::kDelivered: t.delivered += n; break;
    case OccurrenceStatus::kCompleted: t.completed += n; break;
    case OccurrenceStatus::kExpired: t.expired += n; break;
  }
}

constexpr std::string_view kDatasetColumns =
    "dataset_id, study_id, testset_id, test_id, day, seq, status";

}  // namespace

Datastore::Datastore(Database& db) : db_(db) { db_.execute(kSchema); }

std::string_view Datastore::schema() { return kSchema; }

void Datastore::insert_study(const Study& study, const std::vector<std::uint8_t>& salt) {
  Statement st(db_, "INSERT INTO studies (study_id, name, salt, doc) VALUES (?, ?, ?, ?)");
  st.bind(1, study.study_id).bind(2, study.name).bind(3, salt).bind(4, canonical(study));
  st.exec();
}

std::optional<Study> Datastore::find_study(const std::string& study_id) const {
  Statement st(db_, "SELECT doc FROM studies WHERE study_id = ?");
  st.bind(1, study_id);
  return one<Study>(st);
}

std::optional<Study> Datastore::find_study_by_name(const std::string& name) const {
  Statement st(db_, "SELECT doc FROM studies WHERE name = ?");
  st.bind(1, name);
  return one<Study>(st);
}

std::vector<Study> Datastore::list_studies() const {
  Statement st(db_, "SELECT doc FROM studies ORDER BY rowid");
  return all<Study>(st);
}

std::vector<std::uint8_t> Datastore::study_salt(const std::string& study_id) const {
  Statement st(db_, "SELECT salt FROM studies WHERE study_id = ?");
  st.bind(1, study_id);
  if (!st.step()) throw Error(ErrorCode::kNotFound, "study " + study_id + " not found");
  return st.blob(0);
}

void Datastore::insert_credential(const std::string& token_hash, const Credential& credential) {
  Statement st(db_,
               "INSERT INTO credentials (token_hash, study_id, role, subject_id) "
               "VALUES (?, ?, ?, ?)");
  st.bind(1, token_hash);
  if (credential.study_id.empty()) {
    st.bind_null(2);
  } else {
    st.bind(2, credential.study_id);
  }
  st.bind(3, to_string(credential.role)).bind(4, credential.subject_id);
  st.exec();
}

std::optional<Credential> Datastore::find_credential(const std::string& token_hash) const {
  Statement st(db_, "SELECT study_id, role, subject_id FROM credentials WHERE token_hash = ?");
  st.bind(1, token_hash);
  if (!st.step()) return std::nullopt;
  Credential c;
  c.study_id = st.optional_text(0).value_or("");
  c.role = role_from_string(st.text(1)).value();
  c.subject_id = st.optional_text(2);
  return c;
}

void Datastore::insert_subject(const Subject& subject) {
  Statement st(db_,
               "INSERT INTO subjects (subject_id, study_id, device_id, doc) VALUES (?, ?, ?, ?)");
  st.bind(1, subject.subject_id)
      .bind(2, subject.study_id)
      .bind(3, subject.device_id)
      .bind(4, canonical(subject));
  st.exec();
}

std::optional<Subject> Datastore::find_subject(const std::string& subject_id) const {
  Statement st(db_, "SELECT doc FROM subjects WHERE subject_id = ?");
  st.bind(1, subject_id);
  return one<Subject>(st);
}

std::optional<Subject> Datastore::find_subject_by_device(const std::string& device_id) const {
  Statement st(db_, "SELECT doc FROM subjects WHERE device_id = ?");
  st.bind(1, device_id);
  return one<Subject>(st);
}

std::vector<Subject> Datastore::list_subjects(const std::string& study_id) const {
  Statement st(db_, "SELECT doc FROM subjects WHERE study_id = ? ORDER BY rowid");
  st.bind(1, study_id);
  return all<Subject>(st);
}

void Datastore::insert_cohort(const Cohort& cohort) {
  Statement st(db_, "INSERT INTO cohorts (cohort_id, study_id, name, doc) VALUES (?, ?, ?, ?)");
  st.bind(1, cohort.cohort_id).bind(2, cohort.study_id).bind(3, cohort.name);
  st.bind(4, canonical(cohort));
  st.exec();
}

std::optional<Cohort> Datastore::find_cohort(const std::string& cohort_id) const {
  Statement st(db_, "SELECT doc FROM cohorts WHERE cohort_id = ?");
  st.bind(1, cohort_id);
  return one<Cohort>(st);
}

std::optional<Cohort> Datastore::find_cohort_by_name(const std::string& study_id,
                                                     const std::string& name) const {
  Statement st(db_, "SELECT doc FROM cohorts WHERE study_id = ? AND name = ?");
  st.bind(1, study_id).bind(2, name);
  return one<Cohort>(st);
}

std::vector<Cohort> Datastore::list_cohorts(const std::string& study_id) const {
  Statement st(db_, "SELECT doc FROM cohorts WHERE study_id = ? ORDER BY rowid");
  st.bind(1, study_id);
  return all<Cohort>(st);
}

void Datastore::insert_testset(const TestSet& testset) {
  db_.transaction([&] {
    Statement st(db_,
                 "INSERT INTO testsets (testset_id, study_id, name, doc) VALUES (?, ?, ?, ?)");
    st.bind(1, testset.testset_id).bind(2, testset.study_id).bind(3, testset.name);
    st.bind(4, canonical(testset));
    st.exec();
    Statement t(db_, "INSERT INTO tests (test_id, testset_id, study_id, kind) VALUES (?, ?, ?, ?)");
    for (const auto& test : testset.tests) {
      t.reset();
      t.bind(1, test.test_id).bind(2, testset.testset_id).bind(3, testset.study_id);
      t.bind(4, to_string(test.kind));
      t.exec();
    }
  });
}

std::optional<TestSet> Datastore::find_testset(const std::string& testset_id) const {
  Statement st(db_, "SELECT doc FROM testsets WHERE testset_id = ?");
  st.bind(1, testset_id);
  return one<TestSet>(st);
}

std::optional<TestSet> Datastore::find_testset_by_name(const std::string& study_id,
                                                       const std::string& name) const {
  Statement st(db_, "SELECT doc FROM testsets WHERE study_id = ? AND name = ?");
  st.bind(1, study_id).bind(2, name);
  return one<TestSet>(st);
}

std::optional<TestSet> Datastore::find_testset_of_test(const std::string& test_id) const {
  Statement st(db_,
               "SELECT s.doc FROM tests t JOIN testsets s ON s.testset_id = t.testset_id "
               "WHERE t.test_id = ?");
  st.bind(1, test_id);
  return one<TestSet>(st);
}

std::vector<TestSet> Datastore::list_testsets(const std::string& study_id) const {
  Statement st(db_, "SELECT doc FROM testsets WHERE study_id = ? ORDER BY rowid");
  st.bind(1, study_id);
  return all<TestSet>(st);
}

void Datastore::insert_task(const Task& task) {
  Statement st(db_,
               "INSERT INTO tasks (task_id, study_id, testset_id, cohort_id, doc) "
               "VALUES (?, ?, ?, ?, ?)");
  st.bind(1, task.task_id).bind(2, task.study_id).bind(3, task.testset_id);
  st.bind(4, task.cohort_id).bind(5, canonical(task));
  st.exec();
}

std::optional<Task> Datastore::find_task(const std::string& task_id) const {
  Statement st(db_, "SELECT doc FROM tasks WHERE task_id = ?");
  st.bind(1, task_id);
  return one<Task>(st);
}

std::vector<Task> Datastore::list_tasks(const std::string& study_id) const {
  Statement st(db_, "SELECT doc FROM tasks WHERE study_id = ? ORDER BY rowid");
  st.bind(1, study_id);
  return all<Task>(st);
}

std::vector<Task> Datastore::list_all_tasks() const {
  Statement st(db_, "SELECT doc FROM tasks ORDER BY rowid");
  return all<Task>(st);
}

bool Datastore::insert_occurrence(const TaskOccurrence& o) {
  Statement st(db_,
               "INSERT OR IGNORE INTO occurrences (occurrence_id, task_id, study_id, subject_id, "
               "slot, due_start, due_end, status) VALUES (?, ?, ?, ?, ?, ?, ?, ?)");
  st.bind(1, o.occurrence_id).bind(2, o.task_id).bind(3, o.study_id).bind(4, o.subject_id);
  st.bind(5, o.slot).bind(6, o.due_start.ms).bind(7, o.due_end.ms);
  st.bind(8, to_string(o.status));
  return st.exec() == 1;
}

std::optional<TaskOccurrence> Datastore::find_occurrence(const std::string& id) const {
  Statement st(db_, "SELECT " + std::string(kOccurrenceColumns) +
                        " FROM occurrences WHERE occurrence_id = ?");
  st.bind(1, id);
  if (!st.step()) return std::nullopt;
  return read_occurrence(st);
}

std::vector<TaskOccurrence> Datastore::list_open_occurrences_for_subject(
    const std::string& subject_id, Timestamp now) const {
  Statement st(db_, "SELECT " + std::string(kOccurrenceColumns) +
                        " FROM occurrences WHERE subject_id = ? AND due_start <= ? AND "
                        "due_end > ? AND status IN ('pending', 'delivered') "
                        "ORDER BY due_start, rowid");
  st.bind(1, subject_id).bind(2, now.ms).bind(3, now.ms);
  return all_occurrences(st);
}

std::vector<TaskOccurrence> Datastore::list_expirable(Timestamp now) const {
  Statement st(db_, "SELECT " + std::string(kOccurrenceColumns) +
                        " FROM occurrences WHERE status IN ('pending', 'delivered') AND "
                        "due_end <= ? ORDER BY due_end, rowid");
  st.bind(1, now.ms);
  return all_occurrences(st);
}

std::vector<TaskOccurrence> Datastore::list_occurrences_for_task(const std::string& task_id) const {
  Statement st(db_, "SELECT " + std::string(kOccurrenceColumns) +
                        " FROM occurrences WHERE task_id = ? ORDER BY rowid");
  st.bind(1, task_id);
  return all_occurrences(st);
}

std::vector<TaskOccurrence> Datastore::list_occurrences_for_study(
    const std::string& study_id) const {
  Statement st(db_, "SELECT " + std::string(kOccurrenceColumns) +
                        " FROM occurrences WHERE study_id = ? ORDER BY rowid");
  st.bind(1, study_id);
  return all_occurrences(st);
}

std::vector<TaskOccurrence> Datastore::list_occurrences_for_cohort_day(
    const std::string& cohort_id, Date day) const {
  Statement st(db_,
               "SELECT o.occurrence_id, o.task_id, o.study_id, o.subject_id, o.slot, "
               "o.due_start, o.due_end, o.status FROM occurrences o JOIN tasks t ON "
               "t.task_id = o.task_id WHERE t.cohort_id = ? AND o.due_start >= ? AND "
               "o.due_start < ? ORDER BY o.rowid");
  st.bind(1, cohort_id).bind(2, day.start().ms).bind(3, day.next().start().ms);
  return all_occurrences(st);
}

std::vector<TaskOccurrence> Datastore::list_occurrences_for_testset_day(
    const std::string& testset_id, Date day) const {
  Statement st(db_,
               "SELECT o.occurrence_id, o.task_id, o.study_id, o.subject_id, o.slot, "
               "o.due_start, o.due_end, o.status FROM occurrences o JOIN tasks t ON "
               "t.task_id = o.task_id WHERE t.testset_id = ? AND o.due_start >= ? AND "
               "o.due_start < ? ORDER BY o.rowid");
  st.bind(1, testset_id).bind(2, day.start().ms).bind(3, day.next().start().ms);
  return all_occurrences(st);
}

bool Datastore::compare_and_set_status(const std::string& occurrence_id,
                                       std::initializer_list<OccurrenceStatus> from,
                                       OccurrenceStatus to) {
  std::string sql = "UPDATE occurrences SET status = ? WHERE occurrence_id = ? AND status IN (";
  bool first = true;
  for (auto s : from) {
    if (!can_transition(s, to)) {
      throw Error(ErrorCode::kInternal, "illegal occurrence transition " +
                                            std::string(to_string(s)) + " -> " +
                                            std::string(to_string(to)));
    }
    sql += first ? "'" : ", '";
    sql += to_string(s);
    sql += "'";
    first = false;
  }
  sql += ")";
  Statement st(db_, sql);
  st.bind(1, to_string(to)).bind(2, occurrence_id);
  return st.exec() == 1;
}

OccurrenceTally Datastore::tally_for_task(const std::string& task_id) const {
  Statement st(db_, "SELECT status, COUNT(*) FROM occurrences WHERE task_id = ? GROUP BY status");
  st.bind(1, task_id);
  OccurrenceTally t;
  while (st.step()) add_to_tally(t, st.text(0), st.int64(1));
  return t;
}

OccurrenceTally Datastore::tally_for_study(const std::string& study_id) const {
  Statement st(db_,
               "SELECT status, COUNT(*) FROM occurrences WHERE study_id = ? GROUP BY status");
  st.bind(1, study_id);
  OccurrenceTally t;
  while (st.step()) add_to_tally(t, st.text(0), st.int64(1));
  return t;
}

void Datastore::insert_datapoint(const Datapoint& dp) {
  Statement st(db_,
               "INSERT INTO datapoints (datapoint_id, study_id, subject_id, occurrence_id, "
               "test_id, idempotency_key, doc) VALUES (?, ?, ?, ?, ?, ?, ?)");
  st.bind(1, dp.datapoint_id).bind(2, dp.study_id).bind(3, dp.subject_id);
  st.bind(4, dp.occurrence_id).bind(5, dp.test_id).bind(6, dp.idempotency_key);
  st.bind(7, canonical(dp));
  st.exec();
}

std::optional<Datapoint> Datastore::find_datapoint(const std::string& datapoint_id) const {
  Statement st(db_, "SELECT doc FROM datapoints WHERE datapoint_id = ?");
  st.bind(1, datapoint_id);
  return one<Datapoint>(st);
}

std::optional<Datapoint> Datastore::find_datapoint_by_key(const std::string& occurrence_id,
                                                          const std::string& test_id,
                                                          const std::string& key) const {
  Statement st(db_,
               "SELECT doc FROM datapoints WHERE occurrence_id = ? AND test_id = ? AND "
               "idempotency_key = ?");
  st.bind(1, occurrence_id).bind(2, test_id).bind(3, key);
  return one<Datapoint>(st);
}

std::set<std::string> Datastore::tests_with_datapoints(const std::string& occurrence_id) const {
  Statement st(db_, "SELECT DISTINCT test_id FROM datapoints WHERE occurrence_id = ?");
  st.bind(1, occurrence_id);
  std::set<std::string> out;
  while (st.step()) out.insert(st.text(0));
  return out;
}

std::vector<Datapoint> Datastore::list_datapoints(const std::string& study_id) const {
  Statement st(db_, "SELECT doc FROM datapoints WHERE study_id = ? ORDER BY rowid");
  st.bind(1, study_id);
  return all<Datapoint>(st);
}

std::vector<Datapoint> Datastore::list_dataset_datapoints(const std::string& dataset_id) const {
  Statement st(db_, "SELECT doc FROM datapoints WHERE dataset_id = ? ORDER BY rowid");
  st.bind(1, dataset_id);
  return all<Datapoint>(st);
}

std::int64_t Datastore::count_datapoints(const std::string& study_id) const {
  Statement st(db_, "SELECT COUNT(*) FROM datapoints WHERE study_id = ?");
  st.bind(1, study_id);
  st.step();
  return st.int64(0);
}

std::optional<std::string> Datastore::dataset_of(const std::string& datapoint_id) const {
  Statement st(db_, "SELECT dataset_id FROM datapoints WHERE datapoint_id = ?");
  st.bind(1, datapoint_id);
  if (!st.step()) return std::nullopt;
  return st.optional_text(0);
}

void Datastore::insert_dataset(const Dataset& ds) {
  Statement st(db_,
               "INSERT INTO datasets (dataset_id, study_id, testset_id, test_id, day, seq, "
               "status) VALUES (?, ?, ?, ?, ?, ?, ?)");
  st.bind(1, ds.dataset_id).bind(2, ds.study_id).bind(3, ds.testset_id).bind(4, ds.test_id);
  st.bind(5, std::int64_t{ds.day.days}).bind(6, ds.seq).bind(7, to_string(ds.status));
  st.exec();
  for (const auto& dp : ds.datapoint_ids) attach_to_dataset(dp, ds.dataset_id);
}

namespace {

Dataset read_dataset(const Statement& st) {
  Dataset ds;
  ds.dataset_id = st.text(0);
  ds.study_id = st.text(1);
  ds.testset_id = st.text(2);
  ds.test_id = st.text(3);
  ds.day = Date{static_cast<std::int32_t>(st.int64(4))};
  ds.seq = static_cast<int>(st.int64(5));
  ds.status = dataset_status_from_string(st.text(6)).value();
  return ds;
}

}  // namespace

std::optional<Dataset> Datastore::find_dataset(const std::string& dataset_id) const {
  return db_.transaction([&]() -> std::optional<Dataset> {
    Statement st(db_, "SELECT " + std::string(kDatasetColumns) +
                          " FROM datasets WHERE dataset_id = ?");
    st.bind(1, dataset_id);
    if (!st.step()) return std::nullopt;
    Dataset ds = read_dataset(st);
    Statement dps(db_, "SELECT datapoint_id FROM datapoints WHERE dataset_id = ? ORDER BY rowid");
    dps.bind(1, dataset_id);
    while (dps.step()) ds.datapoint_ids.push_back(dps.text(0));
    return ds;
  });
}

std::optional<Dataset> Datastore::find_latest_dataset(const std::string& study_id,
                                                      const std::string& test_id,
                                                      Date day) const {
  std::optional<std::string> id;
  {
    Statement st(db_,
                 "SELECT dataset_id FROM datasets WHERE study_id = ? AND test_id = ? AND "
                 "day = ? ORDER BY seq DESC LIMIT 1");
    st.bind(1, study_id).bind(2, test_id).bind(3, std::int64_t{day.days});
    if (st.step()) id = st.text(0);
  }
  if (!id) return std::nullopt;
  return find_dataset(*id);
}

void Datastore::attach_to_dataset(const std::string& datapoint_id,
                                  const std::string& dataset_id) {
  Statement st(db_,
               "UPDATE datapoints SET dataset_id = ? WHERE datapoint_id = ? AND "
               "dataset_id IS NULL");
  st.bind(1, dataset_id).bind(2, datapoint_id);
  if (st.exec() != 1) {
    throw Error(ErrorCode::kConflict,
                "datapoint " + datapoint_id + " is missing or already in a dataset");
  }
}

std::vector<Dataset> Datastore::list_datasets(const std::string& study_id) const {
  std::vector<std::string> ids;
  {
    Statement st(db_, "SELECT dataset_id FROM datasets WHERE study_id = ? ORDER BY rowid");
    st.bind(1, study_id);
    while (st.step()) ids.push_back(st.text(0));
  }
  std::vector<Dataset> out;
  for (const auto& id : ids) out.push_back(*find_dataset(id));
  return out;
}

std::vector<Dataset> Datastore::list_open_datasets() const {
  std::vector<std::string> ids;
  {
    Statement st(db_, "SELECT dataset_id FROM datasets WHERE status = 'open' ORDER BY rowid");
    while (st.step()) ids.push_back(st.text(0));
  }
  std::vector<Dataset> out;
  for (const auto& id : ids) out.push_back(*find_dataset(id));
  return out;
}

bool Datastore::compare_and_set_dataset_status(const std::string& dataset_id, DatasetStatus from,
                                               DatasetStatus to) {
  Statement st(db_, "UPDATE datasets SET status = ? WHERE dataset_id = ? AND status = ?");
  st.bind(1, to_string(to)).bind(2, dataset_id).bind(3, to_string(from));
  return st.exec() == 1;
}

AnalyticResult Datastore::upsert_result(const AnalyticResult& result) {
  return db_.transaction([&] {
    AnalyticResult stored = result;
    if (auto existing = find_result(result.datapoint_id, result.worker_kind)) {
      stored.result_id = existing->result_id;
      Statement st(db_,
                   "UPDATE results SET dataset_id = ?, produced_at = ?, doc = ? "
                   "WHERE result_id = ?");
      st.bind(1, stored.dataset_id).bind(2, stored.produced_at.ms).bind(3, canonical(stored));
      st.bind(4, stored.result_id);
      st.exec();
    } else {
      Statement st(db_,
                   "INSERT INTO results (result_id, study_id, dataset_id, datapoint_id, "
                   "subject_id, worker_kind, test_id, collected_at, produced_at, doc) "
                   "VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?)");
      st.bind(1, stored.result_id).bind(2, stored.study_id).bind(3, stored.dataset_id);
      st.bind(4, stored.datapoint_id).bind(5, stored.subject_id).bind(6, stored.worker_kind);
      st.bind(7, stored.test_id).bind(8, stored.collected_at.ms).bind(9, stored.produced_at.ms);
      st.bind(10, canonical(stored));
      st.exec();
    }
    return stored;
  });
}

std::optional<AnalyticResult> Datastore::find_result(const std::string& datapoint_id,
                                                     const std::string& worker_kind) const {
  Statement st(db_, "SELECT doc FROM results WHERE datapoint_id = ? AND worker_kind = ?");
  st.bind(1, datapoint_id).bind(2, worker_kind);
  return one<AnalyticResult>(st);
}

std::vector<AnalyticResult> Datastore::query_results(const ResultQuery& q) const {
  std::string sql = "SELECT doc FROM results WHERE study_id = ?";
  if (q.subject_id) sql += " AND subject_id = ?";
  if (q.worker_kind) sql += " AND worker_kind = ?";
  if (q.test_id) sql += " AND test_id = ?";
  if (q.from) sql += " AND collected_at >= ?";
  if (q.to) sql += " AND collected_at < ?";
  sql += " ORDER BY produced_at, collected_at, rowid";
  Statement st(db_, sql);
  int i = 1;
  st.bind(i++, q.study_id);
  if (q.subject_id) st.bind(i++, *q.subject_id);
  if (q.worker_kind) st.bind(i++, *q.worker_kind);
  if (q.test_id) st.bind(i++, *q.test_id);
  if (q.from) st.bind(i++, q.from->ms);
  if (q.to) st.bind(i++, q.to->ms);
  return all<AnalyticResult>(st);
}

std::int64_t Datastore::count_results(const std::string& study_id) const {
  Statement st(db_, "SELECT COUNT(*) FROM results WHERE study_id = ?");
  st.bind(1, study_id);
  st.step();
  return st.int64(0);
}

void Datastore::insert_rule(const Rule& rule) {
  Statement st(db_,
               "INSERT INTO rules (rule_id, study_id, name, active, doc) VALUES (?, ?, ?, ?, ?)");
  st.bind(1, rule.rule_id).bind(2, rule.study_id).bind(3, rule.name);
  st.bind(4, rule.active ? 1 : 0).bind(5, canonical(rule));
  st.exec();
}

std::optional<Rule> Datastore::find_rule(const std::string& rule_id) const {
  Statement st(db_, "SELECT doc FROM rules WHERE rule_id = ?");
  st.bind(1, rule_id);
  return one<Rule>(st);
}

std::optional<Rule> Datastore::find_rule_by_name(const std::string& study_id,
                                                 const std::string& name) const {
  Statement st(db_, "SELECT doc FROM rules WHERE study_id = ? AND name = ?");
  st.bind(1, study_id).bind(2, name);
  return one<Rule>(st);
}

std::vector<Rule> Datastore::list_rules(const std::string& study_id) const {
  Statement st(db_, "SELECT doc FROM rules WHERE study_id = ? ORDER BY rowid");
  st.bind(1, study_id);
  return all<Rule>(st);
}

std::vector<Rule> Datastore::list_active_rules() const {
  Statement st(db_, "SELECT doc FROM rules WHERE active = 1 ORDER BY rowid");
  return all<Rule>(st);
}

std::optional<RuleRun> Datastore::find_rule_run(const std::string& rule_id, Date day) const {
  Statement st(db_,
               "SELECT cohort_id, task_id, automatic, evaluated_at FROM rule_runs "
               "WHERE rule_id = ? AND day = ?");
  st.bind(1, rule_id).bind(2, std::int64_t{day.days});
  if (!st.step()) return std::nullopt;
  return RuleRun{rule_id, day, st.optional_text(0), st.optional_text(1), st.int64(2) != 0,
                 Timestamp{st.int64(3)}};
}

std::vector<RuleRun> Datastore::list_rule_runs(const std::string& rule_id) const {
  Statement st(db_,
               "SELECT day, cohort_id, task_id, automatic, evaluated_at FROM rule_runs "
               "WHERE rule_id = ? ORDER BY day");
  st.bind(1, rule_id);
  std::vector<RuleRun> out;
  while (st.step()) {
    out.push_back(RuleRun{rule_id, Date{static_cast<std::int32_t>(st.int64(0))},
                          st.optional_text(1), st.optional_text(2), st.int64(3) != 0,
                          Timestamp{st.int64(4)}});
  }
  return out;
}

void Datastore::upsert_rule_run(const RuleRun& run) {
  Statement st(db_,
               "INSERT INTO rule_runs (rule_id, day, cohort_id, task_id, automatic, evaluated_at) "
               "VALUES (?, ?, ?, ?, ?, ?) ON CONFLICT (rule_id, day) DO UPDATE SET "
               "cohort_id = excluded.cohort_id, task_id = excluded.task_id, "
               "automatic = MAX(automatic, excluded.automatic), "
               "evaluated_at = excluded.evaluated_at");
  st.bind(1, run.rule_id).bind(2, std::int64_t{run.day.days}).bind(3, run.cohort_id);
  st.bind(4, run.task_id).bind(5, run.automatic ? 1 : 0).bind(6, run.evaluated_at.ms);
  st.exec();
}

std::string Datastore::insert_pseudonym(const std::string& study_id, const std::string& raw_id,
                                        const std::string& pseudonym) {
  return db_.transaction([&] {
    if (auto existing = find_pseudonym(study_id, raw_id)) return *existing;
    Statement st(db_, "INSERT INTO vault (study_id, raw_id, pseudonym) VALUES (?, ?, ?)");
    st.bind(1, study_id).bind(2, raw_id).bind(3, pseudonym);
    st.exec();
    return pseudonym;
  });
}

std::optional<std::string> Datastore::find_pseudonym(const std::string& study_id,
                                                     const std::string& raw_id) const {
  Statement st(db_, "SELECT pseudonym FROM vault WHERE study_id = ? AND raw_id = ?");
  st.bind(1, study_id).bind(2, raw_id);
  if (!st.step()) return std::nullopt;
  return st.text(0);
}

std::vector<VaultEntry> Datastore::export_vault(const std::string& study_id) const {
  Statement st(db_, "SELECT raw_id, pseudonym FROM vault WHERE study_id = ? ORDER BY raw_id");
  st.bind(1, study_id);
  std::vector<VaultEntry> out;
  while (st.step()) out.push_back({st.text(0), st.text(1), study_id});
  return out;
}

std::optional<std::string> Datastore::study_of(EntityKind kind, const std::string& id) const {
  const char* sql = nullptr;
  switch (kind) {
    case EntityKind::kStudy: sql = "SELECT study_id FROM studies WHERE study_id = ?"; break;
    case EntityKind::kSubject: sql = "SELECT study_id FROM subjects WHERE subject_id = ?"; break;
    case EntityKind::kCohort: sql = "SELECT study_id FROM cohorts WHERE cohort_id = ?"; break;
    case EntityKind::kTest: sql = "SELECT study_id FROM tests WHERE test_id = ?"; break;
    case EntityKind::kTestSet: sql = "SELECT study_id FROM testsets WHERE testset_id = ?"; break;
    case EntityKind::kTask: sql = "SELECT study_id FROM tasks WHERE task_id = ?"; break;
    case EntityKind::kOccurrence:
      sql = "SELECT study_id FROM occurrences WHERE occurrence_id = ?";
      break;
    case EntityKind::kDatapoint:
      sql = "SELECT study_id FROM datapoints WHERE datapoint_id = ?";
      break;
    case EntityKind::kDataset: sql = "SELECT study_id FROM datasets WHERE dataset_id = ?"; break;
    case EntityKind::kResult: sql = "SELECT study_id FROM results WHERE result_id = ?"; break;
    case EntityKind::kRule: sql = "SELECT study_id FROM rules WHERE rule_id = ?"; break;
    case EntityKind::kJob: return std::nullopt;
  }
  Statement st(db_, sql);
  st.bind(1, id);
  if (!st.step()) return std::nullopt;
  return st.text(0);
}

}  // namespace hg::store
