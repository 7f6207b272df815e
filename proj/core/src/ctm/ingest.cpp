#include "hg/ctm/ingest.hpp"

#include <spdlog/spdlog.h>

#include "hg/analytics/phq8.hpp"
#include "hg/analytics/sts.hpp"
#include "hg/analytics/tug.hpp"
#include "hg/common/crypto.hpp"
#include "hg/common/error.hpp"
#include "hg/domain/serialize.hpp"

namespace hg::ctm {
namespace {

[[noreturn]] void mismatch(const std::string& why) {
  throw Error(ErrorCode::kSchemaMismatch, why);
}

Json parse_file_json(const std::vector<std::uint8_t>& bytes) {
  Json doc = Json::parse(bytes.begin(), bytes.end(), nullptr, false);
  if (doc.is_discarded()) mismatch("file payload is not valid JSON");
  return doc;
}

}  // namespace

UploadEnvelope parse_envelope(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kValidation, "upload must be a JSON object");
  UploadEnvelope e;
  e.occurrence_id = require_string(j, "occurrence_id");
  e.test_id = require_string(j, "test_id");
  e.idempotency_key = require_string(j, "idempotency_key");
  if (e.idempotency_key.empty()) throw Error(ErrorCode::kValidation, "idempotency_key is empty");
  auto ts = try_parse_timestamp(require_string(j, "collected_at"));
  if (!ts) throw Error(ErrorCode::kValidation, "collected_at must be an ISO-8601 UTC timestamp");
  e.collected_at = *ts;

  const Json& payload = require_field(j, "payload");
  auto kind = payload_kind_from_string(require_string(payload, "kind"));
  if (!kind) throw Error(ErrorCode::kValidation, "payload.kind must be scalar, text or file");
  e.kind = *kind;
  switch (e.kind) {
    case PayloadKind::kScalar:
      e.scalar = require_number(payload, "value");
      break;
    case PayloadKind::kText:
      e.document = require_field(payload, "document");
      break;
    case PayloadKind::kFile:
      e.media_type = payload.value("media_type", std::string("application/json"));
      if (payload.contains("data_base64")) {
        try {
          e.bytes = crypto::base64_decode(require_string(payload, "data_base64"));
        } catch (const std::exception&) {
          throw Error(ErrorCode::kValidation, "payload.data_base64 is not valid base64");
        }
      } else if (payload.contains("document")) {
        const std::string text = payload["document"].dump();
        e.bytes.assign(text.begin(), text.end());
      } else {
        throw Error(ErrorCode::kValidation, "file payload needs data_base64 or document");
      }
      break;
  }
  return e;
}

Json to_json(const UploadEnvelope& e) {
  Json payload = {{"kind", to_string(e.kind)}};
  switch (e.kind) {
    case PayloadKind::kScalar: payload["value"] = e.scalar; break;
    case PayloadKind::kText: payload["document"] = e.document; break;
    case PayloadKind::kFile:
      payload["media_type"] = e.media_type;
      payload["data_base64"] = crypto::base64_encode(e.bytes);
      break;
  }
  return Json{{"occurrence_id", e.occurrence_id},
              {"test_id", e.test_id},
              {"idempotency_key", e.idempotency_key},
              {"collected_at", format_timestamp(e.collected_at)},
              {"payload", std::move(payload)}};
}

Ingestor::Ingestor(store::Datastore& store, store::ObjectStore& objects, queue::JobQueue& queue,
                   IdGenerator& ids, const Clock& clock)
    : store_(store), objects_(objects), queue_(queue), ids_(ids), clock_(clock) {}

void Ingestor::validate_payload(const Test& test, const TaskOccurrence& occurrence,
                                const UploadEnvelope& e) const {
  const auto expected = payload_schema_for(test.kind);
  switch (test.kind) {
    case TestKind::kPhq8: {
      if (e.kind != PayloadKind::kText) mismatch("phq8 uploads must be text payloads");
      auto doc = analytics::parse_phq8_document(e.document);
      if (doc.subject_id != occurrence.subject_id) mismatch("phq8/v1: subject_id mismatch");
      if (doc.occurrence_id != occurrence.occurrence_id) {
        mismatch("phq8/v1: occurrence_id mismatch");
      }
      break;
    }
    case TestKind::kTug: {
      if (e.kind != PayloadKind::kFile) mismatch(std::string(expected) + " must be a file payload");
      auto trace = analytics::parse_accel_document(parse_file_json(e.bytes));
      if (trace.subject_id != occurrence.subject_id) mismatch("accel/v1: subject_id mismatch");
      break;
    }
    case TestKind::kSitToStand: {
      if (e.kind != PayloadKind::kFile) mismatch(std::string(expected) + " must be a file payload");
      analytics::parse_pose_document(parse_file_json(e.bytes));
      break;
    }
  }
}

IngestOutcome Ingestor::ingest(const std::string& subject_id, const UploadEnvelope& e) {
  if (auto existing = store_.find_datapoint_by_key(e.occurrence_id, e.test_id,
                                                    e.idempotency_key)) {
    if (existing->subject_id != subject_id) {
      throw Error(ErrorCode::kForbidden, "occurrence belongs to another subject");
    }
    return {*existing, store_.dataset_of(existing->datapoint_id).value_or(""), false};
  }

  auto occurrence = store_.find_occurrence(e.occurrence_id);
  if (!occurrence) throw Error(ErrorCode::kNotFound, "unknown occurrence " + e.occurrence_id);
  if (occurrence->subject_id != subject_id) {
    throw Error(ErrorCode::kForbidden, "occurrence belongs to another subject");
  }
  auto task = store_.find_task(occurrence->task_id);
  if (!task) throw Error(ErrorCode::kInternal, "occurrence without task");
  auto testset = store_.find_testset(task->testset_id);
  if (!testset) throw Error(ErrorCode::kInternal, "task without test-set");
  const Test* test = testset->find_test(e.test_id);
  if (!test) {
    throw Error(ErrorCode::kValidation,
                "test " + e.test_id + " is not part of occurrence " + e.occurrence_id);
  }
  validate_payload(*test, *occurrence, e);

  Payload payload;
  payload.kind = e.kind;
  if (e.kind == PayloadKind::kScalar) payload.scalar = e.scalar;
  if (e.kind == PayloadKind::kText) payload.text = e.document.dump();
  if (e.kind == PayloadKind::kFile) payload.file = objects_.put(e.bytes, e.media_type);

  const Timestamp now = clock_.now();
  return store_.db().transaction([&]() -> IngestOutcome {
    if (auto raced = store_.find_datapoint_by_key(e.occurrence_id, e.test_id,
                                                   e.idempotency_key)) {
      return {*raced, store_.dataset_of(raced->datapoint_id).value_or(""), false};
    }
    auto current = store_.find_occurrence(e.occurrence_id);

    Datapoint dp;
    dp.datapoint_id = ids_.next(EntityKind::kDatapoint);
    dp.study_id = occurrence->study_id;
    dp.subject_id = subject_id;
    dp.occurrence_id = e.occurrence_id;
    dp.test_id = e.test_id;
    dp.payload = payload;
    dp.collected_at = e.collected_at;
    dp.uploaded_at = now;
    dp.idempotency_key = e.idempotency_key;
    dp.late = current->status == OccurrenceStatus::kExpired || now >= current->due_end;
    store_.insert_datapoint(dp);

    const Date day = date_of(current->due_start);
    auto latest = store_.find_latest_dataset(dp.study_id, dp.test_id, day);
    std::string dataset_id;
    if (latest && latest->status == DatasetStatus::kOpen) {
      dataset_id = latest->dataset_id;
      store_.attach_to_dataset(dp.datapoint_id, dataset_id);
    } else {
      Dataset ds;
      ds.dataset_id = ids_.next(EntityKind::kDataset);
      ds.study_id = dp.study_id;
      ds.testset_id = testset->testset_id;
      ds.test_id = dp.test_id;
      ds.day = day;
      ds.seq = latest ? latest->seq + 1 : 0;
      ds.datapoint_ids = {dp.datapoint_id};
      store_.insert_dataset(ds);
      dataset_id = ds.dataset_id;
    }

    auto done = store_.tests_with_datapoints(e.occurrence_id);
    bool all = true;
    for (const auto& t : testset->tests) all = all && done.contains(t.test_id);
    if (all) {
      store_.compare_and_set_status(e.occurrence_id,
                                    {OccurrenceStatus::kPending, OccurrenceStatus::kDelivered},
                                    OccurrenceStatus::kCompleted);
    }
    return {dp, dataset_id, true};
  });
}

bool Ingestor::day_settled(const Dataset& dataset) const {
  auto occurrences = store_.list_occurrences_for_testset_day(dataset.testset_id, dataset.day);
  for (const auto& o : occurrences) {
    if (o.status == OccurrenceStatus::kPending || o.status == OccurrenceStatus::kDelivered) {
      return false;
    }
  }
  return true;
}

bool Ingestor::publish_one(const Dataset& dataset) {
  auto testset = store_.find_testset(dataset.testset_id);
  const Test* test = testset ? testset->find_test(dataset.test_id) : nullptr;
  if (!test) throw Error(ErrorCode::kInternal, "dataset " + dataset.dataset_id + " has no test");
  try {
    return store_.db().transaction([&] {
      if (!store_.compare_and_set_dataset_status(dataset.dataset_id, DatasetStatus::kOpen,
                                                 DatasetStatus::kPublished)) {
        return false;
      }
      queue_.enqueue(dataset.dataset_id, worker_kind_for(test->kind));
      return true;
    });
  } catch (const Error& e) {
    spdlog::warn("publish of {} deferred: {}", dataset.dataset_id, e.what());
    return false;
  }
}

std::vector<Dataset> Ingestor::publish_due(Timestamp now) {
  std::vector<Dataset> published;
  for (auto& ds : store_.list_open_datasets()) {
    const bool closed = now >= ds.day.next().start();
    if (ds.datapoint_ids.empty()) continue;
    if (!closed && !day_settled(ds)) continue;
    if (publish_one(ds)) {
      ds.status = DatasetStatus::kPublished;
      published.push_back(std::move(ds));
    }
  }
  return published;
}

bool Ingestor::flush(const std::string& dataset_id) {
  auto ds = store_.find_dataset(dataset_id);
  if (!ds) throw Error(ErrorCode::kNotFound, "unknown dataset " + dataset_id);
  if (ds->status != DatasetStatus::kOpen) return false;
  return publish_one(*ds);
}

}  // namespace hg::ctm
