package com.example.json;

import java.util.HashMap;
import java.util.Map;

import org.junit.Test;

import static org.junit.Assert.assertEquals;

public class MapConverterTest {

    private final MapConverter converter = new MapConverter();

    @Test
    public void convertToDatabaseColumn_empty() {
        assertEquals("{}", converter.convertToDatabaseColumn(new HashMap<>()));
    }

    @Test
    public void convertToDatabaseColumn_twoElement() {
        Map<String, String> map = new HashMap<>(8);
        map.put("a", "1");
        map.put("disableCheck", "true");
        String expected = "{\"a\":\"1\",\"disableCheck\":\"true\"}";
        assertEquals(expected, converter.convertToDatabaseColumn(map));
    }
}
