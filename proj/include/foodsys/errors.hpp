#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace foodsys {

// Invalid parameter values: non-positive, non-finite or out of range.
class domain_error : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

// Evaluation on the singular set of the vector field (I <= 0, P <= 0, x <= 0, z <= 0).
class singularity_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Wrong frame, wrong arguments or wrong call order.
class usage_error : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

class integration_error : public std::runtime_error {
public:
  integration_error(const std::string& what, double time)
      : std::runtime_error(what + " (t=" + std::to_string(time) + ")"), time_(time) {}

  double time() const noexcept { return time_; }

private:
  double time_;
};

class nonconvergence_error : public std::runtime_error {
public:
  nonconvergence_error(const std::string& what, std::size_t steps)
      : std::runtime_error(what), steps_(steps) {}

  std::size_t steps() const noexcept { return steps_; }

private:
  std::size_t steps_;
};

// CSV ingestion failure; row is 1-based and counts the header as row 1.
class load_error : public std::runtime_error {
public:
  load_error(std::size_t row, std::string column, const std::string& what)
      : std::runtime_error("row " + std::to_string(row) + ", column '" + column + "': " + what),
        row_(row),
        column_(std::move(column)) {}

  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

private:
  std::size_t row_;
  std::string column_;
};

class sampler_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace foodsys
