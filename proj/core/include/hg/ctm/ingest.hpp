#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hg/common/clock.hpp"
#include "hg/common/ids.hpp"
#include "hg/domain/entities.hpp"
#include "hg/queue/job_queue.hpp"
#include "hg/store/datastore.hpp"
#include "hg/store/object_store.hpp"

namespace hg::ctm {

// One device upload. File payloads carry raw bytes; text payloads carry the
// JSON document itself.
struct UploadEnvelope {
  std::string occurrence_id;
  std::string test_id;
  std::string idempotency_key;
  Timestamp collected_at;
  PayloadKind kind = PayloadKind::kText;
  double scalar = 0.0;
  Json document;                     // text payloads
  std::vector<std::uint8_t> bytes;   // file payloads
  std::string media_type = "application/json";
};

// Wire form:
// {"occurrence_id", "test_id", "idempotency_key", "collected_at",
//  "payload": {"kind": "text", "document": {...}}
//           | {"kind": "file", "media_type", "data_base64": "..."}
//           | {"kind": "file", "document": {...}}
//           | {"kind": "scalar", "value": n}}
UploadEnvelope parse_envelope(const Json& j);
Json to_json(const UploadEnvelope& envelope);

struct IngestOutcome {
  Datapoint datapoint;
  std::string dataset_id;
  bool created = false;  // false when the idempotency key matched
};

// Accepts uploads from devices and routes them into (study, test, day)
// datasets; publishes datasets to the job queue.
class Ingestor {
 public:
  Ingestor(store::Datastore& store, store::ObjectStore& objects, queue::JobQueue& queue,
           IdGenerator& ids, const Clock& clock);

  // `subject_id` is the subject bound to the uploading device credential.
  IngestOutcome ingest(const std::string& subject_id, const UploadEnvelope& envelope);

  // Publishes every open dataset whose UTC day has closed, or whose
  // occurrences for that day are all completed or expired.
  std::vector<Dataset> publish_due(Timestamp now);

  // Publishes one dataset regardless of its day. Returns false when it was
  // not open.
  bool flush(const std::string& dataset_id);

 private:
  void validate_payload(const Test& test, const TaskOccurrence& occurrence,
                        const UploadEnvelope& envelope) const;
  bool day_settled(const Dataset& dataset) const;
  bool publish_one(const Dataset& dataset);

  store::Datastore& store_;
  store::ObjectStore& objects_;
  queue::JobQueue& queue_;
  IdGenerator& ids_;
  const Clock& clock_;
};

}  // namespace hg::ctm
