#pragma once

// Reference values of the four bound formulas, evaluated once in 40-digit
// arithmetic outside this code base and frozen here.

#include <string>
#include <vector>

#include "lcnn/bounds.hpp"

namespace pinned {

struct Case {
  std::string name;
  lcnn::ERCBoundInputs in;
  double empirical;
  double groupsort, lcnn, generalization, dense;
};

inline lcnn::ERCBoundInputs make(double B, double m, std::vector<double> R,
                                 std::vector<std::pair<std::size_t, std::size_t>> dims,
                                 std::size_t d_y, double L_r, double M, double delta) {
  lcnn::ERCBoundInputs in;
  in.B = B;
  in.m = m;
  in.d = R.size();
  in.R = std::move(R);
  in.dims = std::move(dims);
  in.d_y = d_y;
  in.L_r = L_r;
  in.M = M;
  in.delta = delta;
  return in;
}

inline const std::vector<Case>& cases() {
  static const std::vector<Case> c{
      {"unit", make(1, 1, {1}, {}, 1, 1, 1, 0.05), 0.0,
       1.0, 1.0, 6.5000473707674148831, 1.177410022515474691},
      {"two_layer", make(2.5, 100, {1.5, 2.0}, {{40, 4}}, 2, 2, 3, 0.1), 0.01,
       1.5, 2.0, 23.603101709799727027, 1.2488319167365466345},
      {"reactor_model", make(3.5, 10500, {1.4, 1.3, 1.8}, {{40, 4}, {40, 40}}, 2, 16, 65, 0.05),
       4.9e-6, 0.44758680945711525532, 21.860161634047143218, 1980.8850140492534393,
       0.22819474741919845688},
      {"narrow", make(0.7, 50, {0.9, 1.1, 0.5, 2.2}, {{8, 3}, {6, 8}, {5, 6}}, 1, 0.5, 0.25, 0.01),
       0.2, 0.8624439988776083904, 71.276363543603985938, 101.16094745197169466,
       0.25386255203420523102},
      {"linear_many_samples", make(10, 1e6, {3.0}, {}, 3, 1, 2, 0.5), 1.0,
       0.03, 0.01, 1.088385043809932127, 0.03532230067546424073},
      {"delta_one", make(1.25, 7, {2.0, 2.0}, {{2, 9}}, 1, 4, 1, 1.0), 0.0,
       3.7796447300922722721, 1.8898223650461361361, 21.380899352993950775,
       3.1467606485762132294},
      {"wide", make(4.0, 2500, {1.0, 1.0, 1.0}, {{640, 4}, {640, 640}}, 2, 1, 1, 0.05), 3.6e-5,
       0.32, 819.2, 4634.1684695890782804, 0.16314671842700943484},
      {"tiny_sample", make(0.1, 3, {5.0, 0.2}, {{12, 12}}, 4, 0.25, 10, 0.2), 0.5,
       0.11547005383792516572, 1.3856406460551019117, 19.95674088891428244,
       0.096135125773392211811},
      {"deep", make(6.0, 123456, {1.7, 0.6, 1.9, 1.2, 0.8},
                    {{16, 4}, {16, 16}, {32, 16}, {8, 32}}, 1, 3, 7, 0.001),
       0.03, 0.5083234417164378057, 2238.2318727108374639, 18992.168295828847034,
       0.08364363262025300411},
      {"very_wide", make(2.0, 400, {1.5, 1.5}, {{1280, 4}}, 2, 2, 5, 0.05), 0.0,
       0.45, 0.8, 9.9688718606931145087, 0.37464957502096399036},
  };
  return c;
}

}  // namespace pinned
