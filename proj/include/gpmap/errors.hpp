#pragma once

#include <stdexcept>
#include <string>

namespace gpmap {

/// Argument outside an operation's domain (bad symbol, rank out of range,
/// non-viable genome where a replicator is required).
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// Stored data disagrees with itself: checksum mismatch, shard gaps or
/// overlaps, checkpoint written under a different configuration.
class IntegrityError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class UsageError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

} // namespace gpmap
