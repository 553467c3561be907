#pragma once

namespace tcf {

// Spherical-earth geometry shared by the feature builders and the
// verification metrics. All angles in degrees, distances in km.
// Longitudes are canonically [0, 360); latitudes [-90, 90].
namespace geo {

// Mean Earth radius, km.
inline constexpr double kEarthRadiusKm = 6371.0088;

double deg2rad(double d);
double rad2deg(double r);

// Wrap a longitude into [0, 360).
double wrap_lon(double lon);

// Wrap an angle difference into (-180, 180].
double wrap_angle(double deg);

// Great-circle distance between two points, km.
double haversine_km(double lat1, double lon1, double lat2, double lon2);

// Initial great-circle bearing from p1 to p2, degrees clockwise from
// north in [0, 360). Undefined for coincident points (returns 0 there;
// callers that care use bearing_defined()).
double initial_bearing_deg(double lat1, double lon1, double lat2, double lon2);

bool bearing_defined(double lat1, double lon1, double lat2, double lon2);

// Point reached from (lat, lon) travelling `distance_km` along the great
// circle with the given initial bearing.
void destination_point(double lat, double lon, double bearing_deg, double distance_km, double* out_lat,
                       double* out_lon);

// Signed turn from bearing `from_deg` to bearing `to_deg`: clockwise
// (rightward) positive, in (-180, 180].
double turn_angle_deg(double from_deg, double to_deg);

}  // namespace geo
}  // namespace tcf
