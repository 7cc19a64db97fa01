package com.example.report;

import java.util.HashMap;
import java.util.Map;

public class ReportWriter {

    private final Map<String, Integer> counts = new HashMap<>();

    public void record(String outcome) {
        counts.merge(outcome, 1, Integer::sum);
    }

    public String toJson() {
        StringBuilder out = new StringBuilder("{");
        for (Map.Entry<String, Integer> e : counts.entrySet()) {
            if (out.length() > 1) {
                out.append(',');
            }
            out.append('"').append(e.getKey()).append("\":").append(e.getValue());
        }
        return out.append('}').toString();
    }
}
