#pragma once

#include "robustdet/core/container.hpp"
#include "robustdet/model/detector.hpp"

namespace robustdet::model {

Container to_container(const DetectorModel& model);
/// Throws IngestionError if the container is not a detector checkpoint.
DetectorModel from_container(const Container& c);

void save_detector(const std::filesystem::path& path, const DetectorModel& model);
DetectorModel load_detector(const std::filesystem::path& path);

}  // namespace robustdet::model
