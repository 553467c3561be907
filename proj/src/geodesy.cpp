#include "tcf/geodesy.hpp"

#include <cmath>

namespace tcf {
namespace geo {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

double deg2rad(double d) { return d * kPi / 180.0; }
double rad2deg(double r) { return r * 180.0 / kPi; }

double wrap_lon(double lon) {
    double w = std::fmod(lon, 360.0);
    if (w < 0) w += 360.0;
    return w;
}

double wrap_angle(double deg) {
    double w = std::fmod(deg, 360.0);
    if (w > 180.0) w -= 360.0;
    if (w <= -180.0) w += 360.0;
    return w;
}

double haversine_km(double lat1, double lon1, double lat2, double lon2) {
    const double p1 = deg2rad(lat1), p2 = deg2rad(lat2);
    const double dp = deg2rad(lat2 - lat1);
    const double dl = deg2rad(wrap_angle(lon2 - lon1));
    const double sdp = std::sin(dp / 2.0), sdl = std::sin(dl / 2.0);
    const double a = sdp * sdp + std::cos(p1) * std::cos(p2) * sdl * sdl;
    return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(std::min(1.0, a)));
}

bool bearing_defined(double lat1, double lon1, double lat2, double lon2) {
    return !(lat1 == lat2 && wrap_lon(lon1) == wrap_lon(lon2));
}

double initial_bearing_deg(double lat1, double lon1, double lat2, double lon2) {
    if (!bearing_defined(lat1, lon1, lat2, lon2)) return 0.0;
    const double p1 = deg2rad(lat1), p2 = deg2rad(lat2);
    const double dl = deg2rad(wrap_angle(lon2 - lon1));
    const double y = std::sin(dl) * std::cos(p2);
    const double x = std::cos(p1) * std::sin(p2) - std::sin(p1) * std::cos(p2) * std::cos(dl);
    double b = rad2deg(std::atan2(y, x));
    if (b < 0) b += 360.0;
    if (b >= 360.0) b -= 360.0;
    return b;
}

void destination_point(double lat, double lon, double bearing_deg, double distance_km, double* out_lat,
                       double* out_lon) {
    const double delta = distance_km / kEarthRadiusKm;
    const double theta = deg2rad(bearing_deg);
    const double p1 = deg2rad(lat);
    const double l1 = deg2rad(lon);
    const double sp2 = std::sin(p1) * std::cos(delta) + std::cos(p1) * std::sin(delta) * std::cos(theta);
    const double p2 = std::asin(std::max(-1.0, std::min(1.0, sp2)));
    const double y = std::sin(theta) * std::sin(delta) * std::cos(p1);
    const double x = std::cos(delta) - std::sin(p1) * sp2;
    const double l2 = l1 + std::atan2(y, x);
    *out_lat = rad2deg(p2);
    *out_lon = wrap_lon(rad2deg(l2));
}

double turn_angle_deg(double from_deg, double to_deg) { return wrap_angle(to_deg - from_deg); }

}  // namespace geo
}  // namespace tcf
