#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "ppts/model.hpp"

namespace ppts {

enum class EventsMode { presliced, raw };

// raw timestamps: day boundary shifted by day_boundary hours, event clock
// values scaled by clock_scale after slicing
struct RawSliceRule {
    double day_boundary = 0.0;
    double clock_scale = 1.0;
};

// presliced CSV (header day,u) or raw CSV (header timestamp); the returned
// series has default season and trend settings, to be filled by the caller
PatternSeries load_events(const std::string& path, EventsMode mode,
                          const RawSliceRule& rule = {});
// mode detected from the header line
PatternSeries load_events(const std::string& path);

// days since an arbitrary fixed epoch for a proleptic Gregorian date
long days_from_civil(int year, int month, int day);

// shortest decimal representation that parses back to the same double
std::string format_double(double x);

struct FitDocument {
    int format_version = 1;
    std::string config;  // effective config as canonical JSON text
    long n = 0;
    int d = 1, p = 1, q = 0;
    Eigen::MatrixXd theta;     // d x p
    Eigen::VectorXd eta;       // q
    Eigen::VectorXd mu;        // p
    Eigen::MatrixXd seasonal;  // d x p
    bool has_omega = false;
    std::vector<Eigen::MatrixXd> omega_theta;  // d diagonal blocks, p x p
    Eigen::MatrixXd omega_eta;                 // q x q
    bool converged = false;
    int iterations = 0;
    double gradient_norm = 0.0;
    double objective_value = 0.0;
    std::vector<int> ridged_seasons;
};

void write_fit_document(const std::string& path, const FitDocument& doc);
FitDocument read_fit_document(const std::string& path);

}  // namespace ppts
